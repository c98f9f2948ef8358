use std::io::{BufRead, Write};

use super::codec::{decode_frame_msg, decode_hello, encode_action, encode_reset, max_line_len, read_line_bounded, ACK};
use crate::env::{EnvSpec, EnvStep, Environment};
use crate::error::{Error, Result};

/// An environment living on the other side of a protocol stream.
///
/// Actions are named `a0..` (the hello carries only their count) and action 0
/// is taken as the no-op.
pub struct RemoteEnv<R, W> {
    reader: R,
    writer: W,
    spec: EnvSpec,
    line: Vec<u8>,
    max: usize,
    lives: u32,
    /// The frame the server sent after the handshake.
    initial: EnvStep,
}

impl<R: BufRead, W: Write> RemoteEnv<R, W> {
    /// Performs the handshake and reads the server's first frame.
    pub fn connect(mut reader: R, mut writer: W) -> Result<Self> {
        let mut line = Vec::new();
        // the hello is short; any sane W-H-A fits in 64 bytes
        if !read_line_bounded(&mut reader, 64, &mut line)? {
            return Err(Error::Protocol("server closed before hello".into()));
        }
        let (w, h, a) = decode_hello(&line)?;
        writer.write_all(ACK.as_bytes())?;
        writer.flush()?;
        let names: Vec<String> = (0..a).map(|i| format!("a{i}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let spec = EnvSpec::new(w, h, &names, 0, None)?;
        let mut env = Self {
            reader,
            writer,
            max: max_line_len(w, h),
            initial: EnvStep::blank(&spec),
            spec,
            line,
            lives: 0,
        };
        let mut first = EnvStep::blank(&env.spec);
        env.read_frame(&mut first)?;
        env.initial = first;
        Ok(env)
    }

    pub fn initial_frame(&self) -> &EnvStep {
        &self.initial
    }

    fn read_frame(&mut self, out: &mut EnvStep) -> Result<()> {
        if !read_line_bounded(&mut self.reader, self.max, &mut self.line)? {
            return Err(Error::Protocol("server closed the session".into()));
        }
        decode_frame_msg(&self.line, self.spec.frame_len(), out)?;
        self.lives = out.lives;
        Ok(())
    }

    fn send(&mut self, line: &str) -> Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    /// Sends a plain `RESET` (server-chosen seed).
    pub fn reset_default(&mut self, out: &mut EnvStep) -> Result<()> {
        self.send(&encode_reset(None))?;
        self.read_frame(out)
    }
}

impl<R: BufRead, W: Write> Environment for RemoteEnv<R, W> {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset_into(&mut self, seed: u64, out: &mut EnvStep) -> Result<()> {
        self.send(&encode_reset(Some(seed)))?;
        self.read_frame(out)
    }

    fn step_into(&mut self, action: usize, out: &mut EnvStep) -> Result<()> {
        self.spec.check_action(action)?;
        self.send(&encode_action(action))?;
        self.read_frame(out)
    }

    fn lives(&self) -> u32 {
        self.lives
    }
}
