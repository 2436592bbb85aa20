use clap::Parser;

fn main() {
    let cli = mcmlab_cli::Cli::parse();
    match mcmlab_cli::run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("mcmlab: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
