fn main() {
    std::process::exit(cavloss::cli::main_with_args(std::env::args_os()));
}
