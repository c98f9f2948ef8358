//! Debug exports: binary PGM frames and `action reward terminal lives`
//! trajectory files.

use std::fmt::Write as _;

use super::{EnvStep, Environment};
use crate::error::{Error, Result};

/// Encodes a frame as binary (P5) PGM.
pub fn write_pgm(width: usize, height: usize, frame: &[u8]) -> Vec<u8> {
    assert_eq!(frame.len(), width * height, "frame size does not match dimensions");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(frame);
    out
}

/// Decodes a binary PGM written by [`write_pgm`] into `(width, height, pixels)`.
pub fn read_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |msg: &str| Error::Parse { line: 0, msg: format!("pgm: {msg}") };
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("expected 8-bit P5"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let data = &bytes[pos + 1..];
    if data.len() != w * h {
        return Err(bad("pixel count mismatch"));
    }
    Ok((w, h, data.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryEntry {
    pub action: usize,
    pub reward: f64,
    pub terminal: bool,
    pub lives: u32,
}

pub fn write_trajectory(entries: &[TrajectoryEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let _ = writeln!(out, "{} {} {} {}", e.action, e.reward, u8::from(e.terminal), e.lives);
    }
    out
}

/// Parses a trajectory file; `#` lines are comments.
pub fn read_trajectory(text: &str) -> Result<Vec<TrajectoryEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(err("expected `action reward terminal lives`"));
        }
        out.push(TrajectoryEntry {
            action: f[0].parse().map_err(|_| err("bad action"))?,
            reward: f[1].parse().map_err(|_| err("bad reward"))?,
            terminal: match f[2] {
                "0" => false,
                "1" => true,
                _ => return Err(err("terminal must be 0 or 1")),
            },
            lives: f[3].parse().map_err(|_| err("bad lives"))?,
        });
    }
    Ok(out)
}

/// Replays recorded actions from `reset(seed)`, checking every recorded
/// outcome, and returns the frames seen (reset frame first).
pub fn replay_trajectory<E: Environment + ?Sized>(
    env: &mut E,
    seed: u64,
    entries: &[TrajectoryEntry],
) -> Result<Vec<EnvStep>> {
    let mut steps = vec![env.reset(seed)?];
    for (i, e) in entries.iter().enumerate() {
        let s = env.step(e.action)?;
        if s.reward != e.reward || s.terminal != e.terminal || s.lives != e.lives {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!(
                    "replay diverged: recorded ({}, {}, {}), observed ({}, {}, {})",
                    e.reward, e.terminal, e.lives, s.reward, s.terminal, s.lives
                ),
            });
        }
        steps.push(s);
    }
    Ok(steps)
}
