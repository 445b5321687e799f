fn main() {
    std::process::exit(consensus_ldp::cli::main_with_args(std::env::args_os()));
}
