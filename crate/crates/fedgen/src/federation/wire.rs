//! Binary wire format.
//!
//! Frame layout, little-endian throughout:
//! `[kind u8][round u32][client u16][payload_len u32][payload]`
//!
//! Payloads:
//! - prompt upload: per prompt `[kind u8][class u16][domain u16]` plus, for
//!   instance-level prompts, one descriptor byte per feature dimension;
//! - model up/down: `[param_count u32]` then one f32 per parameter.
//!
//! Byte counts are the protocol's communication cost; nothing here is ever
//! estimated.

use crate::error::{Error, Result};
use crate::oracle::Prompt;

pub const FRAME_HEADER_LEN: usize = 1 + 4 + 2 + 4;

const TAG_PROMPT_UPLOAD: u8 = 1;
const TAG_GLOBAL_MODEL_DOWN: u8 = 2;
const TAG_LOCAL_MODEL_UP: u8 = 3;

const PROMPT_CLASS: u8 = 0;
const PROMPT_INSTANCE: u8 = 1;

/// 16-bit client identifier; `SERVER` marks server-originated frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClientId(pub u16);

impl ClientId {
    pub const SERVER: ClientId = ClientId(u16::MAX);
}

impl std::fmt::Display for ClientId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if *self == ClientId::SERVER {
            write!(f, "server")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// A typed wire message. The variant is the kind tag.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    PromptUpload { round: u32, client: ClientId, prompts: Vec<Prompt> },
    GlobalModelDown { round: u32, client: ClientId, params: Vec<f32> },
    LocalModelUp { round: u32, client: ClientId, params: Vec<f32> },
}

impl Message {
    pub fn round(&self) -> u32 {
        match self {
            Message::PromptUpload { round, .. }
            | Message::GlobalModelDown { round, .. }
            | Message::LocalModelUp { round, .. } => *round,
        }
    }

    pub fn client(&self) -> ClientId {
        match self {
            Message::PromptUpload { client, .. }
            | Message::GlobalModelDown { client, .. }
            | Message::LocalModelUp { client, .. } => *client,
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Message::PromptUpload { .. } => TAG_PROMPT_UPLOAD,
            Message::GlobalModelDown { .. } => TAG_GLOBAL_MODEL_DOWN,
            Message::LocalModelUp { .. } => TAG_LOCAL_MODEL_UP,
        }
    }

    fn payload_len(&self) -> usize {
        match self {
            Message::PromptUpload { prompts, .. } => prompts
                .iter()
                .map(|p| match p {
                    Prompt::ClassLevel { .. } => 5,
                    Prompt::InstanceLevel { descriptor, .. } => 5 + descriptor.len(),
                })
                .sum(),
            Message::GlobalModelDown { params, .. } | Message::LocalModelUp { params, .. } => {
                4 + 4 * params.len()
            }
        }
    }

    /// Exact frame size on the wire.
    pub fn encoded_len(&self) -> usize {
        FRAME_HEADER_LEN + self.payload_len()
    }
}

pub fn encode_message(message: &Message) -> Vec<u8> {
    let mut buf = Vec::with_capacity(message.encoded_len());
    buf.push(message.tag());
    buf.extend_from_slice(&message.round().to_le_bytes());
    buf.extend_from_slice(&message.client().0.to_le_bytes());
    buf.extend_from_slice(&(message.payload_len() as u32).to_le_bytes());
    match message {
        Message::PromptUpload { prompts, .. } => {
            for p in prompts {
                match p {
                    Prompt::ClassLevel { class_id, domain_id } => {
                        buf.push(PROMPT_CLASS);
                        buf.extend_from_slice(&class_id.to_le_bytes());
                        buf.extend_from_slice(&domain_id.to_le_bytes());
                    }
                    Prompt::InstanceLevel { class_id, domain_id, descriptor } => {
                        buf.push(PROMPT_INSTANCE);
                        buf.extend_from_slice(&class_id.to_le_bytes());
                        buf.extend_from_slice(&domain_id.to_le_bytes());
                        buf.extend_from_slice(descriptor);
                    }
                }
            }
        }
        Message::GlobalModelDown { params, .. } | Message::LocalModelUp { params, .. } => {
            buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
            for v in params {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    debug_assert_eq!(buf.len(), message.encoded_len());
    buf
}

/// Decode one complete frame. Instance-level descriptors carry no length on
/// the wire, so the expected `feature_dim` is supplied by context.
pub fn decode_message(bytes: &[u8], feature_dim: usize) -> Result<Message> {
    if bytes.len() < FRAME_HEADER_LEN {
        return Err(Error::Malformed(format!(
            "frame truncated: {} bytes, header needs {FRAME_HEADER_LEN}",
            bytes.len()
        )));
    }
    let tag = bytes[0];
    let round = u32::from_le_bytes(bytes[1..5].try_into().unwrap());
    let client = ClientId(u16::from_le_bytes(bytes[5..7].try_into().unwrap()));
    let payload_len = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
    let payload = &bytes[FRAME_HEADER_LEN..];
    if payload.len() != payload_len {
        return Err(Error::Malformed(format!(
            "frame declares {payload_len} payload bytes but carries {}",
            payload.len()
        )));
    }

    match tag {
        TAG_PROMPT_UPLOAD => {
            let mut prompts = Vec::new();
            let mut at = 0usize;
            while at < payload.len() {
                if payload.len() - at < 5 {
                    return Err(Error::Malformed("trailing partial prompt in payload".into()));
                }
                let kind = payload[at];
                let class_id = u16::from_le_bytes(payload[at + 1..at + 3].try_into().unwrap());
                let domain_id = u16::from_le_bytes(payload[at + 3..at + 5].try_into().unwrap());
                at += 5;
                match kind {
                    PROMPT_CLASS => prompts.push(Prompt::ClassLevel { class_id, domain_id }),
                    PROMPT_INSTANCE => {
                        if payload.len() - at < feature_dim {
                            return Err(Error::Malformed(format!(
                                "instance prompt descriptor truncated: {} of {feature_dim} bytes",
                                payload.len() - at
                            )));
                        }
                        prompts.push(Prompt::InstanceLevel {
                            class_id,
                            domain_id,
                            descriptor: payload[at..at + feature_dim].to_vec(),
                        });
                        at += feature_dim;
                    }
                    other => {
                        return Err(Error::Malformed(format!("unknown prompt kind tag {other}")))
                    }
                }
            }
            Ok(Message::PromptUpload { round, client, prompts })
        }
        TAG_GLOBAL_MODEL_DOWN | TAG_LOCAL_MODEL_UP => {
            if payload.len() < 4 {
                return Err(Error::Malformed("model payload shorter than its count field".into()));
            }
            let count = u32::from_le_bytes(payload[..4].try_into().unwrap()) as usize;
            if payload.len() != 4 + 4 * count {
                return Err(Error::Malformed(format!(
                    "model payload declares {count} parameters but carries {} bytes",
                    payload.len() - 4
                )));
            }
            let params = payload[4..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(if tag == TAG_GLOBAL_MODEL_DOWN {
                Message::GlobalModelDown { round, client, params }
            } else {
                Message::LocalModelUp { round, client, params }
            })
        }
        other => Err(Error::Malformed(format!("unknown message kind tag {other}"))),
    }
}
