//! Feature extraction: word + character embeddings, windowed multi-head self-attention
//! and the bidirectional LSTM encoder.

mod attention;
mod embed;
mod lstm;

pub use attention::{local_window, mh_local_attention, window_indices, LocalAttentionHead};
pub use embed::{char_ids, CharEncoder, TokenEmbedder};
pub use lstm::{BiLstm, BiLstmOutput, LstmCell};
