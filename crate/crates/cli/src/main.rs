use std::sync::Arc;

use precoding_cli::{main_with, Context};
use precoding_pipeline::remote::UreqTransport;

fn main() {
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    let mut ctx = Context {
        env: std::env::vars().collect(),
        transport: Arc::new(UreqTransport),
        stdout: &mut stdout,
        stderr: &mut stderr,
    };
    std::process::exit(main_with(std::env::args_os(), &mut ctx));
}
