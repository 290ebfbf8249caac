fn main() {
    std::process::exit(desalt::run(std::env::args_os()));
}
