use std::fmt::Write as _;
use std::io::BufRead;

use crate::env::EnvStep;
use crate::error::{Error, Result};

fn violation(msg: impl Into<String>) -> Error {
    Error::Protocol(msg.into())
}

/// Bytes allowed on one line (newline included) for a `width x height` screen.
pub fn max_line_len(width: usize, height: usize) -> usize {
    2 * width * height + 64
}

/// Reads one `\n`-terminated line into `buf` (newline stripped), never
/// buffering more than `max` bytes. `Ok(false)` means clean end of stream.
pub fn read_line_bounded<R: BufRead + ?Sized>(reader: &mut R, max: usize, buf: &mut Vec<u8>) -> Result<bool> {
    buf.clear();
    loop {
        let available = match reader.fill_buf() {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        };
        if available.is_empty() {
            if buf.is_empty() {
                return Ok(false);
            }
            return Err(violation("stream ended mid-line"));
        }
        let (chunk, done) = match available.iter().position(|&b| b == b'\n') {
            Some(i) => (&available[..i], Some(i + 1)),
            None => (available, None),
        };
        if buf.len() + chunk.len() + usize::from(done.is_some()) > max {
            return Err(violation(format!("line longer than {max} bytes")));
        }
        buf.extend_from_slice(chunk);
        let used = done.unwrap_or(chunk.len());
        reader.consume(used);
        if done.is_some() {
            return Ok(true);
        }
    }
}

/// Strict unsigned decimal: ASCII digits only, no sign, no padding.
fn parse_decimal<T: std::str::FromStr>(s: &[u8], what: &str) -> Result<T> {
    if s.is_empty() || s.len() > 20 || !s.iter().all(u8::is_ascii_digit) {
        return Err(violation(format!("malformed {what} `{}`", String::from_utf8_lossy(s))));
    }
    std::str::from_utf8(s)
        .expect("ascii digits")
        .parse()
        .map_err(|_| violation(format!("{what} out of range")))
}

pub fn encode_hello(width: usize, height: usize, actions: usize) -> String {
    format!("{width}-{height}-{actions}\n")
}

/// Parses a server hello (newline already stripped) into `(width, height, actions)`.
pub fn decode_hello(line: &[u8]) -> Result<(usize, usize, usize)> {
    let mut parts = line.split(|&b| b == b'-');
    let mut next = |what| parts.next().ok_or_else(|| violation("hello must be W-H-A")).and_then(|p| parse_decimal::<usize>(p, what));
    let (w, h, a) = (next("width")?, next("height")?, next("action count")?);
    if parts.next().is_some() {
        return Err(violation("hello must be W-H-A"));
    }
    if w == 0 || h == 0 || a == 0 || w.checked_mul(h).is_none_or(|n| n > 1 << 24) {
        return Err(violation("hello dimensions out of range"));
    }
    Ok((w, h, a))
}

pub const ACK: &str = "OK\n";

/// Appends `<hex>:<terminal>,<lives>,<reward>\n` to `out`. The reward uses the
/// shortest decimal that parses back to the same `f64`.
pub fn encode_frame_msg(step: &EnvStep, out: &mut String) {
    const HEX: &[u8; 16] = b"0123456789abcdef";
    out.reserve(2 * step.frame.len() + 32);
    for &b in &step.frame {
        out.push(HEX[(b >> 4) as usize] as char);
        out.push(HEX[(b & 15) as usize] as char);
    }
    let _ = writeln!(out, ":{},{},{}", u8::from(step.terminal), step.lives, step.reward);
}

fn hex_val(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        _ => None,
    }
}

/// Decodes a frame line (newline stripped) for a `frame_len`-pixel screen into `out`.
pub fn decode_frame_msg(line: &[u8], frame_len: usize, out: &mut EnvStep) -> Result<()> {
    let colon = line.iter().position(|&b| b == b':').ok_or_else(|| violation("frame line lacks `:`"))?;
    let (hex, rest) = (&line[..colon], &line[colon + 1..]);
    if hex.len() != 2 * frame_len {
        return Err(violation(format!("expected {} hex digits, got {}", 2 * frame_len, hex.len())));
    }
    let mut fields = rest.split(|&b| b == b',');
    let terminal = match fields.next() {
        Some(b"0") => false,
        Some(b"1") => true,
        _ => return Err(violation("terminal flag must be 0 or 1")),
    };
    let lives = parse_decimal::<u32>(fields.next().ok_or_else(|| violation("missing lives"))?, "lives")?;
    let reward_text = fields.next().ok_or_else(|| violation("missing reward"))?;
    if fields.next().is_some() {
        return Err(violation("too many fields in frame line"));
    }
    let reward_ok = !reward_text.is_empty()
        && reward_text.len() <= 64
        && reward_text.iter().all(|c| c.is_ascii_digit() || matches!(c, b'-' | b'.' | b'e' | b'E' | b'+'));
    let reward: f64 = if reward_ok {
        std::str::from_utf8(reward_text).expect("ascii").parse().map_err(|_| violation("malformed reward"))?
    } else {
        return Err(violation("malformed reward"));
    };
    if !reward.is_finite() {
        return Err(violation("reward must be finite"));
    }
    out.frame.clear();
    out.frame.reserve(frame_len);
    for pair in hex.chunks_exact(2) {
        match (hex_val(pair[0]), hex_val(pair[1])) {
            (Some(hi), Some(lo)) => out.frame.push(hi << 4 | lo),
            _ => return Err(violation("frame is not lowercase hex")),
        }
    }
    out.terminal = terminal;
    out.lives = lives;
    out.reward = reward;
    Ok(())
}

/// Client-to-server line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientMsg {
    Action(usize),
    /// Start a new game, with an explicit seed or the server's next one.
    Reset(Option<u64>),
}

pub fn encode_action(action: usize) -> String {
    format!("{action}\n")
}

pub fn encode_reset(seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("RESET {s}\n"),
        None => "RESET\n".to_string(),
    }
}

/// Decodes an action or control line (newline stripped), validating action
/// ids against `num_actions`.
pub fn decode_action_msg(line: &[u8], num_actions: usize) -> Result<ClientMsg> {
    if line == b"RESET" {
        return Ok(ClientMsg::Reset(None));
    }
    if let Some(seed) = line.strip_prefix(b"RESET ") {
        return Ok(ClientMsg::Reset(Some(parse_decimal(seed, "seed")?)));
    }
    let a: usize = parse_decimal(line, "action")?;
    if a >= num_actions {
        return Err(Error::OutOfRange { what: "action", index: a, limit: num_actions });
    }
    Ok(ClientMsg::Action(a))
}
