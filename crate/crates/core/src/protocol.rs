//! Newline-delimited JSON sessions.
//!
//! Each line from the client is one command object:
//!
//! ```text
//! {"cmd":"reset","transfer_set":["P"],"seed":7}
//! {"cmd":"reset","task":{...TaskConfig...}}
//! {"cmd":"step","grasp":"Up","move":"Right"}
//! {"cmd":"close"}
//! ```
//!
//! and each is answered by one line: an observation frame
//! `{"observation":[432 reals],"reward":0,"done":false,"step":1}` (no
//! `reward` after a reset), `{"closed":true}`, or an error frame such as
//! `{"error":"malformed_action","detail":"..."}`. An error frame ends the
//! session.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::thread;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::agent::{Agent, AgentError, AgentObservation};
use crate::env::{Action, EnvState, TrapTube};
use crate::grid::GridSize;
use crate::harness::EpisodeResult;
use crate::render::Observation;
use crate::task::{
    sample_task, task_provenance, validate_config, Provenance, TaskConfig, TransferSet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedFrame,
    MalformedAction,
    MalformedReset,
    UnknownCommand,
    NoEpisode,
    EpisodeFinished,
    InvalidTask,
    GenerationExhausted,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("unit variant");
        f.write_str(v.as_str().expect("string"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResetCommand {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_set: Option<TransferSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// An explicit task; when present the sampler is not used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskConfig>,
}

impl ResetCommand {
    pub fn sampled(transfer_set: TransferSet, seed: u64) -> Self {
        ResetCommand {
            transfer_set: Some(transfer_set),
            seed: Some(seed),
            task: None,
        }
    }

    pub fn inline(task: TaskConfig) -> Self {
        ResetCommand {
            transfer_set: None,
            seed: None,
            task: Some(task),
        }
    }

    /// Provenance of the task this command resets to, if well formed.
    pub fn provenance(&self) -> Option<Provenance> {
        match (&self.task, self.transfer_set, self.seed) {
            (Some(task), _, _) => Some(task.seed_provenance),
            (None, Some(set), Some(seed)) => Some(task_provenance(set, seed)),
            _ => None,
        }
    }

    /// Grid of the observations this reset will produce.
    pub fn grid(&self) -> GridSize {
        self.task.as_ref().map_or(GridSize::STANDARD, |t| t.grid)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    Reset(ResetCommand),
    Step(Action),
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationFrame {
    pub observation: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<u8>,
    pub done: bool,
    pub step: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorFrame {
    pub error: ErrorCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ErrorFrame {
    pub fn new(error: ErrorCode, detail: impl Into<String>) -> Self {
        ErrorFrame {
            error,
            detail: Some(detail.into()),
        }
    }
}

impl fmt::Display for ErrorFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.detail {
            Some(d) => write!(f, "{}: {d}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    Observation(ObservationFrame),
    Closed,
    Error(ErrorFrame),
}

impl Response {
    /// Whether the session stops after sending this response.
    pub fn ends_session(&self) -> bool {
        !matches!(self, Response::Observation(_))
    }
}

fn object(line: &str) -> Result<Map<String, Value>, String> {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err("frame is not a JSON object".into()),
        Err(e) => Err(e.to_string()),
    }
}

impl Command {
    /// Parses one line: first as a JSON object with a `cmd` tag, then the
    /// command's own fields, so each failure maps to its own error code.
    pub fn parse(line: &str) -> Result<Command, ErrorFrame> {
        let mut map = object(line).map_err(|e| ErrorFrame::new(ErrorCode::MalformedFrame, e))?;
        let cmd = match map.remove("cmd") {
            Some(Value::String(s)) => s,
            Some(_) => {
                return Err(ErrorFrame::new(
                    ErrorCode::MalformedFrame,
                    "cmd must be a string",
                ))
            }
            None => return Err(ErrorFrame::new(ErrorCode::MalformedFrame, "missing cmd")),
        };
        let body = Value::Object(map);
        match cmd.as_str() {
            "reset" => {
                let reset: ResetCommand = serde_json::from_value(body)
                    .map_err(|e| ErrorFrame::new(ErrorCode::MalformedReset, e.to_string()))?;
                if reset.task.is_none() && (reset.transfer_set.is_none() || reset.seed.is_none()) {
                    return Err(ErrorFrame::new(
                        ErrorCode::MalformedReset,
                        "reset needs transfer_set and seed, or task",
                    ));
                }
                Ok(Command::Reset(reset))
            }
            "step" => serde_json::from_value(body)
                .map(Command::Step)
                .map_err(|e| ErrorFrame::new(ErrorCode::MalformedAction, e.to_string())),
            "close" => Ok(Command::Close),
            other => Err(ErrorFrame::new(
                ErrorCode::UnknownCommand,
                format!("unknown command {other:?}"),
            )),
        }
    }

    pub fn to_line(&self) -> String {
        let (cmd, body) = match self {
            Command::Reset(r) => ("reset", serde_json::to_value(r)),
            Command::Step(a) => ("step", serde_json::to_value(a)),
            Command::Close => ("close", Ok(Value::Object(Map::new()))),
        };
        let mut map = match body.expect("commands serialize") {
            Value::Object(m) => m,
            _ => unreachable!("commands serialize to objects"),
        };
        map.insert("cmd".into(), Value::String(cmd.into()));
        Value::Object(map).to_string()
    }
}

impl Response {
    pub fn parse(line: &str) -> Result<Response, String> {
        let map = object(line)?;
        if map.contains_key("error") {
            serde_json::from_value(Value::Object(map))
                .map(Response::Error)
                .map_err(|e| e.to_string())
        } else if map.contains_key("closed") {
            Ok(Response::Closed)
        } else {
            serde_json::from_value(Value::Object(map))
                .map(Response::Observation)
                .map_err(|e| e.to_string())
        }
    }

    pub fn to_line(&self) -> String {
        match self {
            Response::Observation(o) => serde_json::to_string(o),
            Response::Closed => Ok(r#"{"closed":true}"#.to_owned()),
            Response::Error(e) => serde_json::to_string(e),
        }
        .expect("responses serialize")
    }
}

struct Live {
    env: TrapTube,
    state: EnvState,
    result: EpisodeResult,
    recorded: bool,
}

/// Server side of one connection. Owns at most one live environment.
#[derive(Default)]
pub struct Session {
    live: Option<Live>,
    results: Vec<EpisodeResult>,
    terminated: bool,
}

impl Session {
    pub fn new() -> Self {
        Session::default()
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// Episodes this session has driven, finished or not, in order.
    pub fn results(&self) -> &[EpisodeResult] {
        &self.results
    }

    pub fn into_results(mut self) -> Vec<EpisodeResult> {
        self.retire();
        self.results
    }

    pub fn handle_line(&mut self, line: &str) -> Response {
        let response = match Command::parse(line) {
            Ok(cmd) => self.handle(cmd),
            Err(e) => Response::Error(e),
        };
        if response.ends_session() {
            self.terminated = true;
            self.retire();
        }
        response
    }

    pub fn handle(&mut self, cmd: Command) -> Response {
        match cmd {
            Command::Reset(reset) => self.reset(reset),
            Command::Step(action) => self.step(action),
            Command::Close => Response::Closed,
        }
    }

    fn retire(&mut self) {
        if let Some(live) = self.live.as_mut() {
            if !live.recorded {
                live.recorded = true;
                self.results.push(live.result.clone());
            }
        }
    }

    fn reset(&mut self, reset: ResetCommand) -> Response {
        let config = match reset.task {
            Some(task) => {
                if let Err(e) = validate_config(&task) {
                    return Response::Error(ErrorFrame::new(ErrorCode::InvalidTask, e.to_string()));
                }
                task
            }
            None => {
                let set = reset.transfer_set.expect("checked at parse");
                let seed = reset.seed.expect("checked at parse");
                match sample_task(set, seed) {
                    Ok(c) => c,
                    Err(e) => {
                        return Response::Error(ErrorFrame::new(
                            ErrorCode::GenerationExhausted,
                            e.to_string(),
                        ))
                    }
                }
            }
        };
        let env = match TrapTube::new(&config) {
            Ok(env) => env,
            Err(e) => {
                return Response::Error(ErrorFrame::new(ErrorCode::InvalidTask, e.to_string()))
            }
        };
        self.retire();
        let state = env.reset();
        let frame = ObservationFrame {
            observation: env.observe(&state).into_vec(),
            reward: None,
            done: state.done,
            step: 0,
        };
        self.live = Some(Live {
            result: EpisodeResult::new(config.seed_provenance),
            env,
            state,
            recorded: false,
        });
        Response::Observation(frame)
    }

    fn step(&mut self, action: Action) -> Response {
        let Some(live) = self.live.as_mut() else {
            return Response::Error(ErrorFrame::new(ErrorCode::NoEpisode, "step before reset"));
        };
        let step = match live.env.step(&live.state, action) {
            Ok(s) => s,
            Err(e) => {
                return Response::Error(ErrorFrame::new(ErrorCode::EpisodeFinished, e.to_string()))
            }
        };
        live.state = step.state;
        live.result.record(action, step.reward);
        let frame = ObservationFrame {
            observation: live.env.observe(&step.state).into_vec(),
            reward: Some(step.reward),
            done: step.done,
            step: step.state.step_count,
        };
        if step.done {
            self.retire();
        }
        Response::Observation(frame)
    }
}

/// Runs one session over a line stream until `close`, an error frame or end
/// of input. Returns the episodes it drove.
pub fn serve<R: BufRead, W: Write>(mut reader: R, mut writer: W) -> io::Result<Vec<EpisodeResult>> {
    let mut session = Session::new();
    let mut buf = Vec::new();
    while !session.is_terminated() {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        let response = match std::str::from_utf8(&buf) {
            Ok(line) if line.trim().is_empty() => continue,
            Ok(line) => session.handle_line(line),
            Err(_) => session.handle_line("\u{0}"),
        };
        writer.write_all(response.to_line().as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(session.into_results())
}

fn serve_stream(stream: TcpStream) -> io::Result<Vec<EpisodeResult>> {
    stream.set_nodelay(true)?;
    let reader = io::BufReader::new(stream.try_clone()?);
    serve(reader, io::BufWriter::new(stream))
}

/// Accepts connections and serves each on its own thread with its own
/// environment. Stops after `max_sessions` connections if given and returns
/// their episodes in accept order; otherwise serves forever.
pub fn serve_tcp(
    listener: TcpListener,
    max_sessions: Option<usize>,
) -> io::Result<Vec<Vec<EpisodeResult>>> {
    let mut handles = Vec::new();
    for stream in listener.incoming() {
        let stream = stream?;
        handles.push(thread::spawn(move || serve_stream(stream)));
        if max_sessions.is_some_and(|n| handles.len() >= n) {
            break;
        }
    }
    handles
        .into_iter()
        .map(|h| {
            h.join()
                .unwrap_or_else(|_| Err(io::Error::other("session thread panicked")))
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("server sent an unreadable frame: {0}")]
    BadFrame(String),
    #[error("server error {0}")]
    Server(ErrorFrame),
    #[error("server closed the connection")]
    Disconnected,
    #[error("unexpected response to {0}")]
    Unexpected(&'static str),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Client side of a session.
pub struct RemoteEnv<R, W> {
    reader: R,
    writer: W,
}

impl RemoteEnv<io::BufReader<TcpStream>, TcpStream> {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(RemoteEnv::new(
            io::BufReader::new(stream.try_clone()?),
            stream,
        ))
    }
}

impl<R: BufRead, W: Write> RemoteEnv<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        RemoteEnv { reader, writer }
    }

    pub fn send(&mut self, cmd: &Command) -> Result<Response, ClientError> {
        self.writer.write_all(cmd.to_line().as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ClientError::Disconnected);
        }
        match Response::parse(&line).map_err(ClientError::BadFrame)? {
            Response::Error(e) => Err(ClientError::Server(e)),
            r => Ok(r),
        }
    }

    fn observation(
        &mut self,
        cmd: &Command,
        what: &'static str,
    ) -> Result<ObservationFrame, ClientError> {
        match self.send(cmd)? {
            Response::Observation(o) => Ok(o),
            _ => Err(ClientError::Unexpected(what)),
        }
    }

    pub fn reset(&mut self, reset: ResetCommand) -> Result<ObservationFrame, ClientError> {
        self.observation(&Command::Reset(reset), "reset")
    }

    pub fn step(&mut self, action: Action) -> Result<ObservationFrame, ClientError> {
        self.observation(&Command::Step(action), "step")
    }

    pub fn close(&mut self) -> Result<(), ClientError> {
        match self.send(&Command::Close)? {
            Response::Closed => Ok(()),
            _ => Err(ClientError::Unexpected("close")),
        }
    }
}

/// Plays one episode through a remote environment with a local agent,
/// building the same [`EpisodeResult`] an in-process run would.
pub fn drive_episode<R: BufRead, W: Write>(
    env: &mut RemoteEnv<R, W>,
    agent: &mut dyn Agent,
    reset: ResetCommand,
) -> Result<EpisodeResult, ClientError> {
    let task = reset.provenance().ok_or(ClientError::Unexpected("reset"))?;
    let grid = reset.grid();
    let mut result = EpisodeResult::new(task);
    agent.begin_episode(&task);
    let mut frame = env.reset(reset)?;
    let mut prev_action = None;
    let mut prev_reward = 0;
    while !frame.done {
        let obs = AgentObservation {
            observation: Observation {
                grid,
                data: std::mem::take(&mut frame.observation),
            },
            prev_action,
            prev_reward,
        };
        let action = agent.act(&obs)?;
        frame = env.step(action)?;
        let reward = frame
            .reward
            .ok_or_else(|| ClientError::BadFrame("step frame without reward".into()))?;
        result.record(action, reward);
        prev_action = Some(action);
        prev_reward = reward;
    }
    agent.end_episode(&result);
    Ok(result)
}
