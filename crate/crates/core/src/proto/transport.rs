use std::ffi::CString;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, ErrorKind};
use std::os::unix::ffi::OsStrExt;
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::client::RemoteEnv;
use super::server::{serve_session, SessionEnd};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::scalar::derive_seed;

/// Where a protocol server listens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// A local stream socket at this path.
    Unix(PathBuf),
    /// A directory holding the FIFO pair `to_env` (client -> server) and
    /// `from_env` (server -> client).
    Fifo(PathBuf),
}

impl FromStr for Endpoint {
    type Err = Error;

    /// `unix:<path>` or `fifo:<dir>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("unix", p)) if !p.is_empty() => Ok(Self::Unix(p.into())),
            Some(("fifo", p)) if !p.is_empty() => Ok(Self::Fifo(p.into())),
            _ => Err(Error::Config(format!("endpoint `{s}` must be unix:<path> or fifo:<dir>"))),
        }
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Unix(p) => write!(f, "unix:{}", p.display()),
            Self::Fifo(p) => write!(f, "fifo:{}", p.display()),
        }
    }
}

pub type UnixRemote = RemoteEnv<BufReader<UnixStream>, UnixStream>;
pub type FifoRemote = RemoteEnv<BufReader<File>, File>;

pub fn fifo_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("to_env"), dir.join("from_env"))
}

fn mkfifo(path: &Path) -> Result<()> {
    let c = CString::new(path.as_os_str().as_bytes()).map_err(|_| Error::Config("FIFO path contains NUL".into()))?;
    // SAFETY: `c` is a valid NUL-terminated path for the duration of the call.
    if unsafe { libc::mkfifo(c.as_ptr(), 0o600) } != 0 {
        let err = std::io::Error::last_os_error();
        if err.kind() != ErrorKind::AlreadyExists {
            return Err(err.into());
        }
    }
    Ok(())
}

/// Creates the FIFO pair in `dir` (existing FIFOs are reused).
pub fn make_fifo_pair(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (to_env, from_env) = fifo_paths(dir);
    mkfifo(&to_env)?;
    mkfifo(&from_env)
}

/// Serves sessions one at a time until `max_sessions` have ended (forever if
/// `None`). Session `k` starts its game with seed `derive_seed(seed, k)`.
pub fn serve<E: Environment + ?Sized>(env: &mut E, endpoint: &Endpoint, seed: u64, max_sessions: Option<u64>) -> Result<Vec<SessionEnd>> {
    let mut ends = Vec::new();
    let more = |n: usize| max_sessions.is_none_or(|m| (n as u64) < m);
    match endpoint {
        Endpoint::Unix(path) => {
            let listener = UnixListener::bind(path)?;
            log::info!("serving on {endpoint}");
            while more(ends.len()) {
                let (stream, _) = listener.accept()?;
                let mut reader = BufReader::new(stream.try_clone()?);
                let mut writer = stream;
                let end = serve_session(env, &mut reader, &mut writer, derive_seed(seed, ends.len() as u64))?;
                log::info!("session ended: {end:?}");
                ends.push(end);
            }
        }
        Endpoint::Fifo(dir) => {
            make_fifo_pair(dir)?;
            let (to_env, from_env) = fifo_paths(dir);
            log::info!("serving on {endpoint}");
            while more(ends.len()) {
                let mut reader = BufReader::new(File::open(&to_env)?);
                let mut writer = OpenOptions::new().write(true).open(&from_env)?;
                let end = serve_session(env, &mut reader, &mut writer, derive_seed(seed, ends.len() as u64))?;
                log::info!("session ended: {end:?}");
                ends.push(end);
            }
        }
    }
    Ok(ends)
}

pub fn connect_unix(path: &Path) -> Result<UnixRemote> {
    let stream = UnixStream::connect(path)?;
    RemoteEnv::connect(BufReader::new(stream.try_clone()?), stream)
}

/// Opens the client ends of the FIFO pair (write end first, matching the
/// order the server opens them).
pub fn connect_fifo(dir: &Path) -> Result<FifoRemote> {
    let (to_env, from_env) = fifo_paths(dir);
    let writer = OpenOptions::new().write(true).open(to_env)?;
    let reader = BufReader::new(File::open(from_env)?);
    RemoteEnv::connect(reader, writer)
}
