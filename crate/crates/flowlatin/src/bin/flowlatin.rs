use std::io::BufRead;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let stdin = std::io::stdin();
    let mut stdin: Box<dyn BufRead> = Box::new(stdin.lock());
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    let code = flowlatin::cli::dispatch(&argv, &mut stdin, &mut stdout, &mut stderr);
    std::process::exit(code);
}
