fn main() { std::process::exit(patchnote::cli::run()); }
