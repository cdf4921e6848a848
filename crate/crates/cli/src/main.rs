fn main() {
    std::process::exit(lure_contract_cli::run(std::env::args_os()));
}
