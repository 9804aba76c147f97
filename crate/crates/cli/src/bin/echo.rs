//! Loopback predictor: answers each `RGBB` batch with the mean pixel of every
//! frame, one line per frame. Used to exercise the external protocol.

use std::io::{self, BufWriter, ErrorKind, Read, Write};
use std::process::ExitCode;

use xplmark_core::predictor::wire;

fn main() -> ExitCode {
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut out = BufWriter::new(io::stdout().lock());
    loop {
        let mut header = [0u8; wire::HEADER_LEN];
        match input.read_exact(&mut header) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => return ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("xplmark-echo: {e}");
                return ExitCode::FAILURE;
            }
        }
        let batch = wire::decode_header(&header)
            .and_then(|(n, h, w)| wire::payload_len(n, h, w))
            .and_then(|len| {
                let mut bytes = header.to_vec();
                bytes.resize(wire::HEADER_LEN + len, 0);
                input.read_exact(&mut bytes[wire::HEADER_LEN..])?;
                wire::decode_batch(&bytes)
            });
        let frames = match batch {
            Ok(f) => f,
            Err(e) => {
                eprintln!("xplmark-echo: {e}");
                return ExitCode::FAILURE;
            }
        };
        for f in &frames {
            if writeln!(out, "{}", wire::mean_pixel(f)).is_err() {
                return ExitCode::FAILURE;
            }
        }
        if out.flush().is_err() {
            return ExitCode::FAILURE;
        }
    }
}
