use std::io::{BufRead, Write};

use super::codec::{decode_action_msg, encode_frame_msg, encode_hello, max_line_len, read_line_bounded, ClientMsg};
use crate::env::{EnvStep, Environment};
use crate::error::{Error, Result};
use crate::scalar::derive_seed;

/// How a session ended without an I/O failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionEnd {
    /// The client closed its end of the stream.
    Disconnected { steps: u64 },
    /// The client broke the grammar or sent an invalid request; the session
    /// was closed.
    Violation(String),
}

/// Serves one session over a connected stream pair.
///
/// Sends the hello, waits for `OK`, resets the game with `seed` and sends the
/// first frame; then answers each action or `RESET [seed]` line with one
/// frame. A plain `RESET` uses the next seed of a sequence derived from
/// `seed`. Stepping a finished game is a violation.
pub fn serve_session<E, R, W>(env: &mut E, reader: &mut R, writer: &mut W, seed: u64) -> Result<SessionEnd>
where
    E: Environment + ?Sized,
    R: BufRead + ?Sized,
    W: Write + ?Sized,
{
    let spec = env.spec().clone();
    let max = max_line_len(spec.frame_width, spec.frame_height);
    let mut line = Vec::with_capacity(max);
    let mut out = String::with_capacity(max);
    let mut step = EnvStep::blank(&spec);

    writer.write_all(encode_hello(spec.frame_width, spec.frame_height, spec.num_actions()).as_bytes())?;
    writer.flush()?;
    match read_line_bounded(reader, max, &mut line) {
        Ok(true) if line == b"OK" => {}
        Ok(true) => return Ok(violation(format!("expected OK, got `{}`", String::from_utf8_lossy(&line)))),
        Ok(false) => return Ok(SessionEnd::Disconnected { steps: 0 }),
        Err(Error::Protocol(msg)) => return Ok(violation(msg)),
        Err(e) => return Err(e),
    }

    let mut resets = 0u64;
    env.reset_into(seed, &mut step)?;
    send(writer, &step, &mut out)?;
    let mut steps = 0;
    loop {
        match read_line_bounded(reader, max, &mut line) {
            Ok(true) => {}
            Ok(false) => return Ok(SessionEnd::Disconnected { steps }),
            Err(Error::Protocol(msg)) => return Ok(violation(msg)),
            Err(e) => return Err(e),
        }
        match decode_action_msg(&line, spec.num_actions()) {
            Ok(ClientMsg::Reset(s)) => {
                resets += 1;
                env.reset_into(s.unwrap_or_else(|| derive_seed(seed, resets)), &mut step)?;
            }
            Ok(ClientMsg::Action(a)) => {
                if step.terminal {
                    return Ok(violation("action after terminal frame; send RESET".into()));
                }
                env.step_into(a, &mut step)?;
                steps += 1;
            }
            Err(e @ (Error::Protocol(_) | Error::OutOfRange { .. })) => return Ok(violation(e.to_string())),
            Err(e) => return Err(e),
        }
        send(writer, &step, &mut out)?;
    }
}

fn violation(msg: String) -> SessionEnd {
    log::warn!("protocol violation, closing session: {msg}");
    SessionEnd::Violation(msg)
}

fn send<W: Write + ?Sized>(writer: &mut W, step: &EnvStep, buf: &mut String) -> Result<()> {
    buf.clear();
    encode_frame_msg(step, buf);
    writer.write_all(buf.as_bytes())?;
    writer.flush()?;
    Ok(())
}
