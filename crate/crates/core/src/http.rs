//! Shared plumbing for the blocking HTTP provider clients.

use std::time::Duration;

use crate::error::ProviderError;

pub(crate) fn classify(err: &ureq::Error, timeout: Duration) -> ProviderError {
    match err {
        ureq::Error::Timeout(_) => ProviderError::Timeout(format!("no response within {timeout:?}")),
        ureq::Error::Json(e) => ProviderError::BadResponse(e.to_string()),
        other => ProviderError::Unavailable(other.to_string()),
    }
}

/// Runs `call`, retrying retriable failures with linear backoff.
pub(crate) fn with_retries<T>(
    max_retries: u32,
    backoff: Duration,
    mut call: impl FnMut() -> Result<T, ProviderError>,
) -> Result<T, ProviderError> {
    let mut attempt = 0;
    loop {
        match call() {
            Err(e) if e.is_retriable() && attempt < max_retries => {
                attempt += 1;
                tracing::warn!(attempt, error = %e, "provider call failed, retrying");
                std::thread::sleep(backoff * attempt);
            }
            other => return other,
        }
    }
}

#[cfg(test)]
pub(crate) mod testing {
    //! One-shot HTTP responders for exercising the clients without a server
    //! framework.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;
    use std::thread;

    /// Serves each `(status, body)` in order, one connection apiece, and
    /// forwards every request body through the returned channel.
    pub fn serve(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for (status, body) in responses {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut content_length = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        content_length = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; content_length];
                let _ = reader.read_exact(&mut buf);
                let _ = tx.send(String::from_utf8_lossy(&buf).into_owned());
                let mut stream = stream;
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        (format!("http://{addr}"), rx)
    }
}
