fn main() {
    std::process::exit(i32::from(dprm_lab::cli::run(std::env::args().skip(1))));
}
