//! Remote annotator over plain HTTP.
//!
//! One request per label: POST `{"prompt": ..., "response": ..., "persona":
//! ...}` as JSON and expect `{"category": <1..=d>}` back. Any non-2xx
//! status, malformed body, or out-of-range category is a client failure
//! carrying the offending payload. The protocol is a fixed one-shot POST,
//! so it runs on a bare `TcpStream` with per-request timeouts and no
//! retries beyond the caller's resampling loop. Only `http://` URLs are
//! accepted.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use serde::Deserialize;

use crate::annotate::{AnnotatorClient, Persona};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Environment variable consulted for the default endpoint URL.
pub const REMOTE_URL_ENV: &str = "DPRM_LAB_REMOTE_URL";

#[derive(Debug, Clone)]
pub struct RemoteJson {
    host: String,
    port: u16,
    path: String,
    timeout: Duration,
    categories: usize,
}

#[derive(Deserialize)]
struct LabelReply {
    category: i64,
}

impl RemoteJson {
    pub fn new(url: &str, timeout: Duration, categories: usize) -> Result<Self> {
        let rest = url
            .strip_prefix("http://")
            .ok_or_else(|| Error::ClientFailure {
                message: format!("remote annotator needs an http:// URL, got {url:?}"),
                completed_pairs: 0,
            })?;
        let (authority, path) = match rest.find('/') {
            Some(k) => (&rest[..k], &rest[k..]),
            None => (rest, "/"),
        };
        let (host, port) = match authority.rsplit_once(':') {
            Some((h, p)) => (
                h.to_string(),
                p.parse::<u16>().map_err(|_| Error::ClientFailure {
                    message: format!("bad port in URL {url:?}"),
                    completed_pairs: 0,
                })?,
            ),
            None => (authority.to_string(), 80),
        };
        if host.is_empty() {
            return Err(Error::ClientFailure {
                message: format!("missing host in URL {url:?}"),
                completed_pairs: 0,
            });
        }
        Ok(Self {
            host,
            port,
            path: path.to_string(),
            timeout,
            categories,
        })
    }

    fn post(&self, body: &str) -> Result<(u16, String)> {
        let fail = |message: String| Error::ClientFailure {
            message,
            completed_pairs: 0,
        };
        let addrs = format!("{}:{}", self.host, self.port);
        let addr = std::net::ToSocketAddrs::to_socket_addrs(&addrs)
            .map_err(|e| fail(format!("resolve {addrs}: {e}")))?
            .next()
            .ok_or_else(|| fail(format!("no address for {addrs}")))?;
        let mut stream = TcpStream::connect_timeout(&addr, self.timeout)
            .map_err(|e| fail(format!("connect {addrs}: {e}")))?;
        stream
            .set_read_timeout(Some(self.timeout))
            .and_then(|_| stream.set_write_timeout(Some(self.timeout)))
            .map_err(|e| fail(format!("socket timeout setup: {e}")))?;

        let request = format!(
            "POST {} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            self.path,
            self.host,
            body.len(),
            body
        );
        stream
            .write_all(request.as_bytes())
            .map_err(|e| fail(format!("send request: {e}")))?;

        let mut raw = Vec::new();
        stream
            .read_to_end(&mut raw)
            .map_err(|e| fail(format!("read response: {e}")))?;
        let text = String::from_utf8_lossy(&raw);
        let mut lines = text.splitn(2, "\r\n\r\n");
        let head = lines.next().unwrap_or("");
        let payload = lines.next().unwrap_or("").to_string();
        let status = head
            .lines()
            .next()
            .and_then(|line| line.split_whitespace().nth(1))
            .and_then(|code| code.parse::<u16>().ok())
            .ok_or_else(|| fail(format!("malformed response head: {head:?}")))?;
        Ok((status, payload))
    }
}

impl AnnotatorClient for RemoteJson {
    fn label(&mut self, prompt: &str, response: &str, persona: &Persona) -> Result<usize> {
        let body = serde_json::json!({
            "prompt": prompt,
            "response": response,
            "persona": persona.name,
        })
        .to_string();
        let (status, payload) = self.post(&body)?;
        if !(200..300).contains(&status) {
            return Err(Error::ClientFailure {
                message: format!("remote annotator returned status {status}: {payload:?}"),
                completed_pairs: 0,
            });
        }
        let reply: LabelReply =
            serde_json::from_str(&payload).map_err(|e| Error::ClientFailure {
                message: format!("malformed annotator reply {payload:?}: {e}"),
                completed_pairs: 0,
            })?;
        if reply.category < 1 || reply.category > self.categories as i64 {
            return Err(Error::ClientFailure {
                message: format!(
                    "annotator category {} outside 1..={} in payload {payload:?}",
                    reply.category, self.categories
                ),
                completed_pairs: 0,
            });
        }
        Ok(reply.category as usize)
    }
}
