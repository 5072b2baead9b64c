//! Serves any [`ProbabilityModel`] over the wire protocol.
//!
//! Used for tests and for running the in-process backends behind the same
//! interface as an external masked-LM server.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use super::wire::{IncomingRequest, WireResponse};
use crate::prob_backends::ProbabilityModel;

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Applied when a request leaves `top_k` unset.
    pub default_top_k: Option<usize>,
    /// Longest accepted token sequence.
    pub max_length: Option<usize>,
}

/// Answers one request line. Malformed input yields an error response
/// rather than terminating the loop.
pub fn handle_line<M: ProbabilityModel + ?Sized>(
    model: &M,
    options: &ServeOptions,
    line: &str,
) -> WireResponse {
    let request: IncomingRequest = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(String::from))
                .unwrap_or_default();
            return WireResponse::error(id, format!("bad request: {e}"));
        }
    };
    match request {
        IncomingRequest::Tokenize(t) => match model.tokenize(&t.words) {
            Ok(s) => WireResponse::from_tokens(t.id, &s),
            Err(e) => WireResponse::error(t.id, e.to_string()),
        },
        IncomingRequest::Predict(p) => {
            if options.max_length.is_some_and(|m| p.tokens.len() > m) {
                return WireResponse::error(p.id, "context_length");
            }
            let top_k = p.top_k.or(options.default_top_k);
            match model
                .predict_masked(&p.query())
                .and_then(|d| WireResponse::from_distributions(p.id.clone(), &d, top_k))
            {
                Ok(resp) => resp,
                Err(e) => WireResponse::error(p.id, e.to_string()),
            }
        }
    }
}

/// Request loop over one reader/writer pair, until end of input.
pub fn serve_stream<M, R, W>(
    model: &M,
    options: &ServeOptions,
    reader: R,
    mut writer: W,
) -> std::io::Result<()>
where
    M: ProbabilityModel + ?Sized,
    R: BufRead,
    W: Write,
{
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = handle_line(model, options, &line);
        let mut out = serde_json::to_string(&resp).expect("serializable response");
        out.push('\n');
        writer.write_all(out.as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}

/// Accepts connections forever, one thread per connection.
pub fn serve_tcp<M: ProbabilityModel + ?Sized>(
    model: &M,
    options: &ServeOptions,
    listener: TcpListener,
) -> std::io::Result<()> {
    std::thread::scope(|s| {
        for stream in listener.incoming() {
            let stream = stream?;
            s.spawn(move || {
                let reader = match stream.try_clone() {
                    Ok(r) => BufReader::new(r),
                    Err(e) => {
                        log::warn!("connection dropped: {e}");
                        return;
                    }
                };
                if let Err(e) = serve_stream(model, options, reader, stream) {
                    log::warn!("connection ended with error: {e}");
                }
            });
        }
        Ok(())
    })
}
