use clap::Parser;

fn main() {
    let cli = qsd::cli::Cli::parse();
    match qsd::cli::run(cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
