fn main() {
    let args: Vec<String> = std::env::args().collect();
    let env_seed = std::env::var("HETFL_SEED").ok();
    let code = hetfl::cli::main_with(args, env_seed.as_deref(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
