fn main() {
    std::process::exit(ebw_core::cli::main_entry());
}
