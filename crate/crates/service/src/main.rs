fn main() {
    std::process::exit(ptwin_service::cli::main());
}
