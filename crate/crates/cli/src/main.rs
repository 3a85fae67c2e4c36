fn main() {
    match cascade_edl_cli::run(std::env::args_os()) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Err(e) => {
            eprintln!("{}", e.line());
            std::process::exit(e.code());
        }
    }
}
