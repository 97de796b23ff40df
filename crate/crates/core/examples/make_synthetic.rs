//! Regenerates the shipped synthetic example: `cargo run -p atlaspaint-core --example make_synthetic -- data/synthetic`

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data/synthetic".into());
    if let Err(e) = atlaspaint_core::synthetic::write_example(std::path::Path::new(&dir)) {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
    println!("wrote {dir}");
}
