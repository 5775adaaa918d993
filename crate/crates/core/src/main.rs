fn main() {
    std::process::exit(dialogue_enhance::app::run(std::env::args_os()));
}
