//! Line protocol for driving an environment in another process.
//!
//! ```text
//! server: <W>-<H>-<A>\n                      hello, once
//! client: OK\n                               ack, once
//! server: <hex>:<terminal>,<lives>,<reward>\n  initial frame
//! client: <action>\n | RESET\n | RESET <seed>\n
//! server: <hex>:<terminal>,<lives>,<reward>\n  one frame per client line
//! ```
//!
//! `<hex>` is the screen, two lowercase hex digits per pixel, row-major;
//! `<terminal>` is `0` or `1`; `<reward>` is the shortest decimal that
//! round-trips the `f64`. Lines are at most `2*W*H + 64` bytes.

mod client;
mod codec;
mod server;
mod transport;

pub use client::RemoteEnv;
pub use codec::{
    decode_action_msg, decode_frame_msg, decode_hello, encode_action, encode_frame_msg, encode_hello, encode_reset,
    max_line_len, read_line_bounded, ClientMsg, ACK,
};
pub use server::{serve_session, SessionEnd};
pub use transport::{connect_fifo, connect_unix, fifo_paths, make_fifo_pair, serve, Endpoint, FifoRemote, UnixRemote};
