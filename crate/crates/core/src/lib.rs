//! Simulation workbench for LoRa transmitter fingerprinting.
//!
//! The pipeline runs waveform synthesis ([`lora`]), per-device hardware
//! impairments ([`impairments`]), multipath and noise ([`channel`]), capture
//! and framing ([`capture`]), storage ([`sigmf`]), a small CNN ([`cnn`]) and
//! the experiment driver ([`experiment`]). Every stochastic step is seeded.

pub mod capture;
pub mod channel;
pub mod cnn;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod impairments;
pub mod lora;
pub mod seed;
pub mod signal;
pub mod sigmf;

pub use capture::{BandMode, CaptureConfig, Frame, FrameSource, Representation};
pub use channel::{ChannelRealization, Location, ScenarioSpec};
pub use error::{Error, Result};
pub use experiment::{AccuracyMatrix, Experiment, ExperimentPlan};
pub use impairments::{DeviceProfile, PopulationSpread, ReceiverProfile};
pub use lora::{CodingRate, LoRaConfig, SymbolStream};
pub use signal::ComplexSampleBuffer;
pub use sigmf::{DatasetIndex, RecordingMeta, ScenarioFields};
