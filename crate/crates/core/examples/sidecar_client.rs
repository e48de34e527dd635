//! Talk to a scoring sidecar over the newline-delimited JSON protocol.
//!
//! ```text
//! cargo run --example sidecar_client -- 127.0.0.1:9090
//! ```
//!
//! Without an address, a throwaway in-process server answering from the
//! built-in stub stands in for the sidecar.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use mmcorpus::scorer::{Request, Scorer, SidecarClient, StubScorer};
use serde_json::json;

fn local_stub() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        let stub = StubScorer::default();
        let (stream, _) = listener.accept().unwrap();
        let mut w = stream.try_clone().unwrap();
        for line in BufReader::new(stream).lines().map_while(Result::ok) {
            let req: Request = serde_json::from_str(&line).unwrap();
            let text = req.payload["text"].as_str().unwrap_or_default();
            let result = match req.op.as_str() {
                "ping" => json!("pong"),
                "lid" => json!(stub.lid(text).unwrap()),
                "embed_text" => json!(stub.embed_text(text).unwrap()),
                _ => json!(null),
            };
            writeln!(w, "{}", json!({"id": req.id, "ok": true, "result": result})).unwrap();
        }
    });
    addr
}

fn main() -> mmcorpus::Result<()> {
    let addr = std::env::args().nth(1).unwrap_or_else(local_stub);
    let client = SidecarClient::connect(addr.as_str())?;
    client.ping()?;
    println!("lid: {:?}", &client.lid("Le marché ouvre tôt le samedi matin.")?[..3]);
    let v = client.embed_text("a quiet harbour")?;
    println!("embedding dim {}, first {:?}", v.len(), &v[..4]);
    Ok(())
}
