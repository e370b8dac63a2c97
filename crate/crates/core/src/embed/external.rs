//! Client for out-of-process embedding providers.
//!
//! Line-delimited JSON, one request in flight per connection. The server
//! opens with a handshake line `{"dim": int, "name": string, ...}`; each
//! request `{"tokens": [...], "position": int}` is answered by either
//! `{"vector": [...]}` or `{"error": string}`.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ContextQuery, ContextVector, EmbedError, EmbeddingProvider};

/// Token sent in place of the focus word. The server masks as well, but the
/// word never leaves the process.
pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Deserialize)]
struct Handshake {
    dim: usize,
    name: String,
}

#[derive(Serialize)]
struct Request<'a> {
    tokens: Vec<&'a str>,
    position: usize,
}

#[derive(Deserialize)]
struct Response {
    vector: Option<Vec<f64>>,
    error: Option<String>,
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
}

pub struct ExternalProvider {
    name: String,
    dim: usize,
    conn: Mutex<Connection>,
    child: Option<Child>,
}

impl std::fmt::Debug for ExternalProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalProvider")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

fn transport(e: std::io::Error) -> EmbedError {
    EmbedError::Transport(e.to_string())
}

impl ExternalProvider {
    /// Connects according to an address string: `stdio:<command line>` spawns
    /// a child process, anything else (optionally prefixed `tcp://`) is a
    /// TCP `host:port`.
    pub fn connect(address: &str) -> Result<Self, EmbedError> {
        if let Some(cmd) = address.strip_prefix("stdio:") {
            let mut parts = cmd.split_whitespace();
            let program = parts
                .next()
                .ok_or_else(|| EmbedError::Transport("empty stdio command".into()))?;
            let args: Vec<&str> = parts.collect();
            Self::spawn(program, &args)
        } else {
            Self::connect_tcp(address.strip_prefix("tcp://").unwrap_or(address))
        }
    }

    pub fn connect_tcp(addr: &str) -> Result<Self, EmbedError> {
        let stream = TcpStream::connect(addr).map_err(transport)?;
        let reader = BufReader::new(stream.try_clone().map_err(transport)?);
        Self::from_streams(reader, stream)
    }

    pub fn spawn(program: &str, args: &[&str]) -> Result<Self, EmbedError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(transport)?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut provider = Self::from_streams(BufReader::new(stdout), stdin)?;
        provider.child = Some(child);
        Ok(provider)
    }

    /// Performs the handshake over arbitrary streams.
    pub fn from_streams<R, W>(mut reader: R, writer: W) -> Result<Self, EmbedError>
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        let line = read_line(&mut reader)?;
        let hs: Handshake = serde_json::from_str(&line)
            .map_err(|e| EmbedError::Protocol(format!("bad handshake {line:?}: {e}")))?;
        if hs.dim == 0 {
            return Err(EmbedError::Protocol("handshake declares dim 0".into()));
        }
        Ok(ExternalProvider {
            name: hs.name,
            dim: hs.dim,
            conn: Mutex::new(Connection {
                reader: Box::new(reader),
                writer: Box::new(writer),
            }),
            child: None,
        })
    }
}

fn read_line(reader: &mut impl BufRead) -> Result<String, EmbedError> {
    let mut line = String::new();
    let n = reader.read_line(&mut line).map_err(transport)?;
    if n == 0 {
        return Err(EmbedError::Transport("connection closed".into()));
    }
    Ok(line)
}

impl EmbeddingProvider for ExternalProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, query: &ContextQuery<'_>) -> Result<ContextVector, EmbedError> {
        let tokens = query
            .sentence()
            .tokens()
            .iter()
            .enumerate()
            .map(|(i, t)| if i == query.position() { MASK_TOKEN } else { t.as_str() })
            .collect();
        let mut body = serde_json::to_string(&Request {
            tokens,
            position: query.position(),
        })
        .expect("request serializes");
        body.push('\n');

        let line = {
            let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
            conn.writer.write_all(body.as_bytes()).map_err(transport)?;
            conn.writer.flush().map_err(transport)?;
            read_line(&mut conn.reader)?
        };

        let resp: Response = serde_json::from_str(&line)
            .map_err(|e| EmbedError::Protocol(format!("bad response {line:?}: {e}")))?;
        match (resp.vector, resp.error) {
            (_, Some(msg)) => Err(EmbedError::Remote(msg)),
            (Some(v), None) if v.len() == self.dim => Ok(ContextVector::new(v, self.space())),
            (Some(v), None) => Err(EmbedError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            }),
            (None, None) => Err(EmbedError::Protocol(
                "response has neither vector nor error".into(),
            )),
        }
    }
}

impl Drop for ExternalProvider {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
