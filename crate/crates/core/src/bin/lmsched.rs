fn main() {
    std::process::exit(lmsched::cli::run_cli());
}
