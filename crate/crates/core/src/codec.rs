//! Packet framing for the on-off keyed light link.
//!
//! A packet is `preamble ∥ sfd ∥ manchester(payload)`. Symbol `1` means the
//! light is on, `0` means it is off. Manchester codewords never hold more
//! than two equal symbols in a row, so the `000` inside the preamble cannot
//! appear anywhere else in a looping transmission.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Default payload width in bits.
pub const DEFAULT_PAYLOAD_BITS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("payload must hold at least one bit")]
    EmptyPayload,
    #[error("payload has {actual} bits, framing expects {expected}")]
    PayloadLength { expected: usize, actual: usize },
    #[error("symbol stream has odd length {0}")]
    OddLength(usize),
    #[error("invalid Manchester pair ({0}, {0}) at symbol {1}")]
    InvalidPair(u8, usize),
    #[error("no complete packet found in stream")]
    NoPacket,
    #[error("symbol stream must not be empty")]
    EmptyStream,
    #[error("invalid symbol character {0:?}")]
    InvalidSymbol(char),
    #[error("value {value:#x} does not fit in {bits} bits")]
    Overflow { value: u64, bits: usize },
    #[error("bit width {0} out of range 1..=64")]
    BitWidth(usize),
}

/// The hardware identifier carried by one packet, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Payload {
    bits: Vec<u8>,
}

impl Payload {
    pub fn new(bits: Vec<u8>) -> Result<Self, CodecError> {
        if bits.is_empty() {
            return Err(CodecError::EmptyPayload);
        }
        Ok(Payload {
            bits: bits.into_iter().map(|b| (b != 0) as u8).collect(),
        })
    }

    /// Builds an `n_bits` wide payload from an integer, MSB first.
    pub fn from_value(value: u64, n_bits: usize) -> Result<Self, CodecError> {
        if n_bits == 0 || n_bits > 64 {
            return Err(CodecError::BitWidth(n_bits));
        }
        if n_bits < 64 && value >> n_bits != 0 {
            return Err(CodecError::Overflow { value, bits: n_bits });
        }
        let bits = (0..n_bits).rev().map(|i| ((value >> i) & 1) as u8).collect();
        Ok(Payload { bits })
    }

    pub fn value(&self) -> u64 {
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Hex rendering, zero padded to the payload width.
    pub fn to_hex(&self) -> String {
        let digits = self.bits.len().div_ceil(4);
        format!("0x{:0width$x}", self.value(), width = digits)
    }
}

/// Ordered channel symbols; `1` = light on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolStream {
    symbols: Vec<u8>,
}

impl SymbolStream {
    pub fn new(symbols: Vec<u8>) -> Result<Self, CodecError> {
        if symbols.is_empty() {
            return Err(CodecError::EmptyStream);
        }
        Ok(SymbolStream {
            symbols: symbols.into_iter().map(|s| (s != 0) as u8).collect(),
        })
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The stream repeated `times` times back to back.
    pub fn repeated(&self, times: usize) -> SymbolStream {
        SymbolStream {
            symbols: self.symbols.repeat(times.max(1)),
        }
    }

    /// Cyclic rotation to the left by `k` symbols.
    pub fn rotated(&self, k: usize) -> SymbolStream {
        let mut symbols = self.symbols.clone();
        let n = symbols.len();
        symbols.rotate_left(k % n);
        SymbolStream { symbols }
    }
}

impl fmt::Display for SymbolStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.symbols {
            f.write_str(if s == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for SymbolStream {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let symbols = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(CodecError::InvalidSymbol(other)),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        SymbolStream::new(symbols)
    }
}

/// Fixed packet framing: preamble, start-frame delimiter and symbols per bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramingConfig {
    pub preamble: Vec<u8>,
    pub sfd: Vec<u8>,
    pub symbols_per_bit: usize,
    pub payload_bits: usize,
}

impl Default for FramingConfig {
    fn default() -> Self {
        FramingConfig {
            preamble: vec![1, 0, 0, 0, 1],
            sfd: vec![0, 1],
            symbols_per_bit: 2,
            payload_bits: DEFAULT_PAYLOAD_BITS,
        }
    }
}

impl FramingConfig {
    pub fn with_payload_bits(payload_bits: usize) -> Self {
        FramingConfig {
            payload_bits,
            ..Default::default()
        }
    }

    fn header_len(&self) -> usize {
        self.preamble.len() + self.sfd.len()
    }
}

/// Packet length in symbols: `M + S + N·n_symbol`.
pub fn packet_size(n_bits: usize, framing: &FramingConfig) -> Result<usize, CodecError> {
    if n_bits == 0 {
        return Err(CodecError::EmptyPayload);
    }
    Ok(framing.header_len() + n_bits * framing.symbols_per_bit)
}

/// Bit 0 → `1,0`; bit 1 → `0,1`.
pub fn manchester_encode(payload: &Payload) -> SymbolStream {
    let symbols = payload
        .bits()
        .iter()
        .flat_map(|&b| if b == 0 { [1, 0] } else { [0, 1] })
        .collect();
    SymbolStream { symbols }
}

pub fn manchester_decode(symbols: &[u8]) -> Result<Payload, CodecError> {
    if !symbols.len().is_multiple_of(2) {
        return Err(CodecError::OddLength(symbols.len()));
    }
    if symbols.is_empty() {
        return Err(CodecError::EmptyPayload);
    }
    let bits = symbols
        .chunks_exact(2)
        .enumerate()
        .map(|(i, pair)| match (pair[0], pair[1]) {
            (1, 0) => Ok(0),
            (0, 1) => Ok(1),
            (s, _) => Err(CodecError::InvalidPair(s, 2 * i)),
        })
        .collect::<Result<Vec<u8>, _>>()?;
    Ok(Payload { bits })
}

pub fn build_packet(payload: &Payload, framing: &FramingConfig) -> Result<SymbolStream, CodecError> {
    if payload.len() != framing.payload_bits {
        return Err(CodecError::PayloadLength {
            expected: framing.payload_bits,
            actual: payload.len(),
        });
    }
    let mut symbols = Vec::with_capacity(packet_size(payload.len(), framing)?);
    symbols.extend_from_slice(&framing.preamble);
    symbols.extend_from_slice(&framing.sfd);
    symbols.extend_from_slice(manchester_encode(payload).symbols());
    Ok(SymbolStream { symbols })
}

/// Every index where the preamble starts, ascending.
pub fn find_preamble(stream: &[u8], framing: &FramingConfig) -> Vec<usize> {
    let p = &framing.preamble;
    if p.is_empty() || stream.len() < p.len() {
        return Vec::new();
    }
    stream
        .windows(p.len())
        .enumerate()
        .filter(|(_, w)| *w == p.as_slice())
        .map(|(i, _)| i)
        .collect()
}

/// All payload copies that decode cleanly, in stream order.
pub fn decode_copies(stream: &[u8], framing: &FramingConfig, n_bits: usize) -> Vec<Payload> {
    let body = n_bits * framing.symbols_per_bit;
    let m = framing.preamble.len();
    let s = framing.sfd.len();
    find_preamble(stream, framing)
        .into_iter()
        .filter_map(|i| {
            let sfd_at = i + m;
            let data_at = sfd_at + s;
            if data_at + body > stream.len() || stream[sfd_at..data_at] != framing.sfd[..] {
                return None;
            }
            manchester_decode(&stream[data_at..data_at + body]).ok()
        })
        .collect()
}

/// Recovers the payload from a stream that may start mid-packet.
///
/// With several decoded copies the most frequent one wins; ties go to the
/// copy seen first.
pub fn parse_packet(stream: &[u8], framing: &FramingConfig, n_bits: usize) -> Result<Payload, CodecError> {
    if n_bits == 0 {
        return Err(CodecError::EmptyPayload);
    }
    let copies = decode_copies(stream, framing, n_bits);
    majority(&copies).cloned().ok_or(CodecError::NoPacket)
}

fn majority(copies: &[Payload]) -> Option<&Payload> {
    let mut best: Option<(&Payload, usize)> = None;
    for (i, candidate) in copies.iter().enumerate() {
        if copies[..i].contains(candidate) {
            continue;
        }
        let votes = copies.iter().filter(|c| *c == candidate).count();
        if best.is_none_or(|(_, v)| votes > v) {
            best = Some((candidate, votes));
        }
    }
    best.map(|(p, _)| p)
}
