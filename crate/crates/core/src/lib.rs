//! Limit order book laboratory: an exact continuous double auction engine,
//! a background-trader simulator, stream files and preprocessing, history
//! batching, a count-based generator and realism statistics.

pub mod book;
pub mod eval;
pub mod markov;
pub mod order;
pub mod sampler;
pub mod sim;
pub mod stream_io;
pub mod surrogate;
