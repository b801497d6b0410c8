fn main() {
    std::process::exit(lutstruction::cli::main_with_args(
        std::env::args_os().collect(),
    ));
}
