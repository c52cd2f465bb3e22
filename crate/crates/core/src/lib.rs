//! Link-level simulation of network-coded multiple access with rate-diverse users.
//!
//! Three users share one slot towards a two-antenna base station. The receiver runs a
//! bank of decoders, each targeting either a user's packet or an XOR of several users'
//! packets, then recovers native packets by eliminating over the decoded XOR equations
//! within a slot and, after erasure decoding of whole messages, across slots.

pub mod analysis;
pub mod bits;
pub mod bridge;
pub mod channel;
pub mod crc;
pub mod detect;
pub mod error;
pub mod fec;
pub mod harness;
pub mod macode;
pub mod modem;
pub mod profile;
pub mod rag;
pub mod seed;

pub use bits::BitPacket;
pub use bridge::{mac_bridge, phy_bridge, run_slot_pipeline, MacLedger, PacketRef, SlotLedger};
pub use channel::{ChannelModel, FadingModel, GainVariation, SlotObservation};
pub use detect::{joint_llr, run_decoder_bank, sic_decode, DecodedEquation};
pub use error::{Error, Result};
pub use fec::{conv_encode, viterbi_decode, ConvCodeSpec, LlrVector};
pub use harness::{emit_results, run_scenario, ResultRow, ScenarioConfig, Stage};
pub use macode::{mac_decode, mac_encode, MacCodeSpec, Message};
pub use modem::{ModulationScheme, SymbolBlock};
pub use profile::{EquationLabel, Profile};
