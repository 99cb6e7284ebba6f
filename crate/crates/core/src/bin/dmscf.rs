use clap::Parser;

fn main() {
    let cli = dmscf::cli::Cli::parse();
    match dmscf::cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(1);
        }
    }
}
