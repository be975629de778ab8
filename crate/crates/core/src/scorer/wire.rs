//! Newline-delimited JSON protocol for scorers living in another process.
//!
//! One request per line, one response per line, strictly in order. Every
//! message carries `"v"`. Session state stays with the server; the client
//! only holds opaque session ids.
//!
//! ```text
//! {"v":1,"kind":"hello"}                                  -> {"v":1,"kind":"hello","max_admissible":4096}
//! {"v":1,"kind":"reset","question":["who","is"]}          -> {"v":1,"kind":"session","session":"s1"}
//! {"v":1,"kind":"step","session":"s1","admissible":[..]}  -> {"v":1,"kind":"scores","session":"s1","log_scores":[..]}
//! {"v":1,"kind":"fork","session":"s1"}                    -> {"v":1,"kind":"session","session":"s2"}
//! {"v":1,"kind":"commit","session":"s2","chosen_index":0} -> {"v":1,"kind":"session","session":"s2"}
//! {"v":1,"kind":"drop","session":"s1"}                    -> {"v":1,"kind":"ok"}
//! ```
//!
//! Failures produce `{"v":1,"kind":"error","message":..}` and leave every
//! session as it was.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::traits::{Candidate, CandidateKind, Scorer, ScorerError};

pub const PROTOCOL_VERSION: u32 = 1;

/// One admissible token on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireCandidate {
    pub index: usize,
    pub surface: String,
    pub text: String,
    /// How the built-in scorer embeds the token. Nested rather than
    /// flattened: special tokens carry their own `index`.
    pub token: CandidateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Request {
    Hello,
    Reset { question: Vec<String> },
    Step { session: String, admissible: Vec<WireCandidate> },
    Fork { session: String },
    Commit { session: String, chosen_index: usize },
    Drop { session: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    Hello { max_admissible: usize },
    Session { session: String },
    Scores { session: String, log_scores: Vec<f64> },
    Ok,
    Error { message: String },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

pub fn encode_request(req: &Request) -> String {
    serde_json::to_string(&Envelope { v: PROTOCOL_VERSION, body: req }).expect("requests serialize")
}

pub fn encode_response(resp: &Response) -> String {
    serde_json::to_string(&Envelope { v: PROTOCOL_VERSION, body: resp }).expect("responses serialize")
}

fn decode_versioned<T: for<'de> Deserialize<'de>>(line: &str) -> Result<T, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("malformed message: {e}"))?;
    match value.get("v").and_then(|v| v.as_u64()) {
        Some(v) if v == PROTOCOL_VERSION as u64 => {}
        Some(v) => return Err(format!("unsupported protocol version {v}")),
        None => return Err("missing protocol version `v`".into()),
    }
    serde_json::from_value::<Envelope<T>>(value).map(|e| e.body).map_err(|e| format!("malformed message: {e}"))
}

pub fn decode_request(line: &str) -> Result<Request, String> {
    decode_versioned(line)
}

pub fn decode_response(line: &str) -> Result<Response, String> {
    decode_versioned(line)
}

struct ServerSession<S: Scorer> {
    session: S::Session,
    pending: Option<(S::Pending, usize)>,
}

impl<S: Scorer> Clone for ServerSession<S>
where
    S::Pending: Clone,
{
    fn clone(&self) -> Self {
        ServerSession { session: self.session.clone(), pending: self.pending.clone() }
    }
}

/// Serves any in-process scorer over the protocol.
pub struct Server<S: Scorer> {
    scorer: S,
    max_admissible: usize,
    sessions: HashMap<String, ServerSession<S>>,
    next_id: u64,
}

impl<S: Scorer> Server<S>
where
    S::Pending: Clone,
{
    pub fn new(scorer: S, max_admissible: usize) -> Self {
        Server { scorer, max_admissible, sessions: HashMap::new(), next_id: 0 }
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.len()
    }

    fn fresh_id(&mut self) -> String {
        self.next_id += 1;
        format!("s{}", self.next_id)
    }

    /// Answers one request line. Never panics on bad input.
    pub fn handle_line(&mut self, line: &str) -> String {
        let resp = match decode_request(line) {
            Ok(req) => self.handle(req),
            Err(message) => Response::Error { message },
        };
        encode_response(&resp)
    }

    pub fn handle(&mut self, req: Request) -> Response {
        match self.try_handle(req) {
            Ok(r) => r,
            Err(message) => Response::Error { message },
        }
    }

    fn try_handle(&mut self, req: Request) -> Result<Response, String> {
        match req {
            Request::Hello => Ok(Response::Hello { max_admissible: self.max_admissible }),
            Request::Reset { question } => {
                let session = self.scorer.reset(&question).map_err(|e| e.to_string())?;
                let id = self.fresh_id();
                self.sessions.insert(id.clone(), ServerSession { session, pending: None });
                Ok(Response::Session { session: id })
            }
            Request::Step { session, admissible } => {
                if admissible.len() > self.max_admissible {
                    return Err(format!("{} admissible tokens exceed the limit of {}", admissible.len(), self.max_admissible));
                }
                if let Some(bad) = admissible.iter().enumerate().find(|(i, c)| c.index != *i) {
                    return Err(format!("admissible entry {} has index {}", bad.0, bad.1.index));
                }
                let entry = self.sessions.get(&session).ok_or_else(|| format!("unknown session `{session}`"))?;
                let candidates: Vec<Candidate> = admissible
                    .into_iter()
                    .map(|c| Candidate { text: c.text, surface: c.surface, kind: c.token })
                    .collect();
                let (log_scores, pending) = self.scorer.step(&entry.session, &candidates).map_err(|e| e.to_string())?;
                if log_scores.len() != candidates.len() || log_scores.iter().any(|x| x.is_nan()) {
                    return Err("scorer produced misaligned or NaN scores".into());
                }
                let entry = self.sessions.get_mut(&session).expect("checked above");
                entry.pending = Some((pending, candidates.len()));
                Ok(Response::Scores { session, log_scores })
            }
            Request::Fork { session } => {
                let copy = self.sessions.get(&session).ok_or_else(|| format!("unknown session `{session}`"))?.clone();
                let id = self.fresh_id();
                self.sessions.insert(id.clone(), copy);
                Ok(Response::Session { session: id })
            }
            Request::Commit { session, chosen_index } => {
                let entry = self.sessions.get(&session).ok_or_else(|| format!("unknown session `{session}`"))?;
                let (pending, len) = entry.pending.as_ref().ok_or_else(|| format!("session `{session}` has no scored step to commit"))?;
                if chosen_index >= *len {
                    return Err(format!("chosen_index {chosen_index} out of range for {len} admissible tokens"));
                }
                let next = self.scorer.commit(&entry.session, pending, chosen_index).map_err(|e| e.to_string())?;
                self.sessions.insert(session.clone(), ServerSession { session: next, pending: None });
                Ok(Response::Session { session })
            }
            Request::Drop { session } => {
                self.sessions.remove(&session).ok_or_else(|| format!("unknown session `{session}`"))?;
                Ok(Response::Ok)
            }
        }
    }
}

/// Reads requests until end of input, writing one response per line.
pub fn serve<S: Scorer, R: BufRead, W: Write>(server: &mut Server<S>, input: R, mut output: W) -> std::io::Result<()>
where
    S::Pending: Clone,
{
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = server.handle_line(&line);
        writeln!(output, "{resp}")?;
        output.flush()?;
    }
    Ok(())
}

/// Carries one request line and returns one response line.
pub trait Transport {
    fn exchange(&mut self, line: &str) -> Result<String, ScorerError>;
}

/// Talks to a server over a pair of byte streams.
pub struct StreamTransport<R, W> {
    reader: R,
    writer: W,
}

impl<R: BufRead, W: Write> StreamTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        StreamTransport { reader, writer }
    }
}

impl<R: BufRead, W: Write> Transport for StreamTransport<R, W> {
    fn exchange(&mut self, line: &str) -> Result<String, ScorerError> {
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        let mut resp = String::new();
        if self.reader.read_line(&mut resp)? == 0 {
            return Err(ScorerError::Remote("scorer closed the connection".into()));
        }
        Ok(resp)
    }
}

/// Hands lines straight to an in-process server. Everything still goes
/// through JSON, so it exercises the full protocol without a subprocess.
pub struct Loopback<S: Scorer>(pub Server<S>);

impl<S: Scorer> Transport for Loopback<S>
where
    S::Pending: Clone,
{
    fn exchange(&mut self, line: &str) -> Result<String, ScorerError> {
        Ok(self.0.handle_line(line))
    }
}

/// A scorer subprocess speaking the protocol on its standard streams.
pub struct ChildTransport {
    child: Child,
    inner: StreamTransport<BufReader<ChildStdout>, ChildStdin>,
}

impl ChildTransport {
    pub fn spawn(mut command: Command) -> Result<Self, ScorerError> {
        let mut child = command.stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(ChildTransport { child, inner: StreamTransport::new(BufReader::new(stdout), stdin) })
    }
}

impl Transport for ChildTransport {
    fn exchange(&mut self, line: &str) -> Result<String, ScorerError> {
        self.inner.exchange(line)
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Client side: a [`Scorer`] whose work happens behind a transport.
pub struct RemoteScorer<T: Transport> {
    transport: Mutex<T>,
    max_admissible: usize,
}

impl<T: Transport> RemoteScorer<T> {
    /// Performs the handshake.
    pub fn connect(transport: T) -> Result<Self, ScorerError> {
        let remote = RemoteScorer { transport: Mutex::new(transport), max_admissible: usize::MAX };
        match remote.call(&Request::Hello)? {
            Response::Hello { max_admissible } => Ok(RemoteScorer { max_admissible, ..remote }),
            other => Err(unexpected(&other)),
        }
    }

    pub fn max_admissible(&self) -> usize {
        self.max_admissible
    }

    fn call(&self, req: &Request) -> Result<Response, ScorerError> {
        let line = encode_request(req);
        let resp = self.transport.lock().expect("transport lock").exchange(&line)?;
        match decode_response(resp.trim_end()).map_err(ScorerError::Remote)? {
            Response::Error { message } => Err(ScorerError::Remote(message)),
            other => Ok(other),
        }
    }

    fn session_call(&self, req: &Request) -> Result<String, ScorerError> {
        match self.call(req)? {
            Response::Session { session } => Ok(session),
            other => Err(unexpected(&other)),
        }
    }
}

fn unexpected(resp: &Response) -> ScorerError {
    ScorerError::Remote(format!("unexpected response {}", encode_response(resp)))
}

impl<T: Transport> Scorer for RemoteScorer<T> {
    type Session = String;
    /// The session that was stepped.
    type Pending = String;

    fn reset(&self, question: &[String]) -> Result<String, ScorerError> {
        self.session_call(&Request::Reset { question: question.to_vec() })
    }

    fn step(&self, session: &String, candidates: &[Candidate]) -> Result<(Vec<f64>, String), ScorerError> {
        if candidates.is_empty() {
            return Err(ScorerError::Empty);
        }
        if candidates.len() > self.max_admissible {
            return Err(ScorerError::Remote(format!(
                "{} admissible tokens exceed the scorer limit of {}",
                candidates.len(),
                self.max_admissible
            )));
        }
        let admissible = candidates
            .iter()
            .enumerate()
            .map(|(index, c)| WireCandidate { index, surface: c.surface.clone(), text: c.text.clone(), token: c.kind })
            .collect();
        match self.call(&Request::Step { session: session.clone(), admissible })? {
            Response::Scores { log_scores, .. } if log_scores.len() == candidates.len() => Ok((log_scores, session.clone())),
            Response::Scores { log_scores, .. } => {
                Err(ScorerError::Misaligned { expected: candidates.len(), got: log_scores.len() })
            }
            other => Err(unexpected(&other)),
        }
    }

    fn commit(&self, _session: &String, pending: &String, choice: usize) -> Result<String, ScorerError> {
        let child = self.session_call(&Request::Fork { session: pending.clone() })?;
        self.session_call(&Request::Commit { session: child, chosen_index: choice })
    }

    fn release(&self, session: String) {
        let _ = self.call(&Request::Drop { session });
    }
}
