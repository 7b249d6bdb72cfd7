use clap::Parser;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = vad_pipeline::cli::Cli::parse();
    vad_pipeline::cli::run(cli)
}
