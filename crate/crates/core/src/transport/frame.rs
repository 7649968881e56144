//! Wire format of the TCP backend.
//!
//! Every message travels as a length-prefixed frame, all integers
//! little-endian:
//!
//! ```text
//! frame   := frame_len:u32 message
//! message := opcode:u8 seg:u16 unit:u32 offset:u64 len:u32 payload[frame_len - 19]
//! ```
//!
//! `unit` is always the sending unit. For `GET` the payload is empty and `len`
//! is the number of requested bytes; for `PUT`, `GET_REPLY` and `CTRL` the
//! payload carries `len` bytes. `BARRIER` and `CTRL` put their message tag in
//! `offset`. A `GET_REPLY` reports a failed lookup at the target by a non-zero
//! status in `offset` (see [`ReplyStatus`]).

use std::io::{self, Read, Write};

/// Size of the fixed message header following the length prefix.
pub const HEADER_LEN: usize = 1 + 2 + 4 + 8 + 4;

/// Frames larger than this are rejected as corrupt.
pub const MAX_FRAME_LEN: usize = 1 << 31;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Put = 1,
    Get = 2,
    GetReply = 3,
    Flush = 4,
    FlushAck = 5,
    Barrier = 6,
    Ctrl = 7,
}

impl TryFrom<u8> for Opcode {
    type Error = io::Error;

    fn try_from(v: u8) -> io::Result<Opcode> {
        Ok(match v {
            1 => Opcode::Put,
            2 => Opcode::Get,
            3 => Opcode::GetReply,
            4 => Opcode::Flush,
            5 => Opcode::FlushAck,
            6 => Opcode::Barrier,
            7 => Opcode::Ctrl,
            _ => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("unknown opcode {v}"),
                ))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum ReplyStatus {
    Ok = 0,
    UnknownSegment = 1,
    OutOfRange = 2,
}

impl ReplyStatus {
    pub fn from_code(code: u64) -> ReplyStatus {
        match code {
            0 => ReplyStatus::Ok,
            1 => ReplyStatus::UnknownSegment,
            _ => ReplyStatus::OutOfRange,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub opcode: Opcode,
    pub segment: u16,
    pub unit: u32,
    pub offset: u64,
    pub len: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(opcode: Opcode, segment: u16, unit: u32, offset: u64, len: u32) -> Frame {
        Frame {
            opcode,
            segment,
            unit,
            offset,
            len,
            payload: Vec::new(),
        }
    }

    pub fn with_payload(opcode: Opcode, segment: u16, unit: u32, offset: u64, payload: Vec<u8>) -> Frame {
        Frame {
            opcode,
            segment,
            unit,
            offset,
            len: payload.len() as u32,
            payload,
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_frame(w, self.opcode, self.segment, self.unit, self.offset, self.len, &self.payload)
    }

    /// Reads one frame. Returns `Ok(None)` on a clean end of stream.
    pub fn read_from<R: Read>(r: &mut R) -> io::Result<Option<Frame>> {
        let mut prefix = [0u8; 4];
        match r.read_exact(&mut prefix) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e),
        }
        let frame_len = u32::from_le_bytes(prefix) as usize;
        if !(HEADER_LEN..=MAX_FRAME_LEN).contains(&frame_len) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("bad frame length {frame_len}"),
            ));
        }
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        let opcode = Opcode::try_from(header[0])?;
        let segment = u16::from_le_bytes([header[1], header[2]]);
        let unit = u32::from_le_bytes(header[3..7].try_into().unwrap());
        let offset = u64::from_le_bytes(header[7..15].try_into().unwrap());
        let len = u32::from_le_bytes(header[15..19].try_into().unwrap());
        let mut payload = vec![0u8; frame_len - HEADER_LEN];
        r.read_exact(&mut payload)?;
        Ok(Some(Frame {
            opcode,
            segment,
            unit,
            offset,
            len,
            payload,
        }))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + HEADER_LEN + self.payload.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

/// Writes a frame without first assembling it, so payloads are not copied twice.
pub fn write_frame<W: Write>(
    w: &mut W,
    opcode: Opcode,
    segment: u16,
    unit: u32,
    offset: u64,
    len: u32,
    payload: &[u8],
) -> io::Result<()> {
    let frame_len = (HEADER_LEN + payload.len()) as u32;
    let mut header = [0u8; 4 + HEADER_LEN];
    header[0..4].copy_from_slice(&frame_len.to_le_bytes());
    header[4] = opcode as u8;
    header[5..7].copy_from_slice(&segment.to_le_bytes());
    header[7..11].copy_from_slice(&unit.to_le_bytes());
    header[11..19].copy_from_slice(&offset.to_le_bytes());
    header[19..23].copy_from_slice(&len.to_le_bytes());
    w.write_all(&header)?;
    w.write_all(payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn put_frame_fixture() {
        let frame = Frame::with_payload(Opcode::Put, 0x0102, 3, 0x10, vec![0xaa, 0xbb]);
        let expected: Vec<u8> = vec![
            21, 0, 0, 0, // frame_len = 19 + 2
            1, // PUT
            0x02, 0x01, // seg
            3, 0, 0, 0, // unit
            0x10, 0, 0, 0, 0, 0, 0, 0, // offset
            2, 0, 0, 0, // len
            0xaa, 0xbb,
        ];
        assert_eq!(frame.to_bytes(), expected);
    }

    #[test]
    fn get_frame_has_no_payload() {
        let frame = Frame::new(Opcode::Get, 1, 0, 8, 64);
        let bytes = frame.to_bytes();
        assert_eq!(bytes.len(), 4 + HEADER_LEN);
        assert_eq!(&bytes[19..23], &64u32.to_le_bytes());
        let back = Frame::read_from(&mut bytes.as_slice()).unwrap().unwrap();
        assert_eq!(back, frame);
    }

    #[test]
    fn rejects_unknown_opcode_and_short_frames() {
        let mut bytes = Frame::new(Opcode::Flush, 0, 0, 0, 0).to_bytes();
        bytes[4] = 99;
        assert!(Frame::read_from(&mut bytes.as_slice()).is_err());
        let short = [3u8, 0, 0, 0, 1, 2, 3];
        assert!(Frame::read_from(&mut short.as_slice()).is_err());
        assert!(Frame::read_from(&mut [].as_slice()).unwrap().is_none());
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(
            op in 1u8..=7,
            seg in any::<u16>(),
            unit in any::<u32>(),
            offset in any::<u64>(),
            payload in proptest::collection::vec(any::<u8>(), 0..64),
        ) {
            let frame = Frame::with_payload(Opcode::try_from(op).unwrap(), seg, unit, offset, payload);
            let bytes = frame.to_bytes();
            let back = Frame::read_from(&mut bytes.as_slice()).unwrap().unwrap();
            prop_assert_eq!(back, frame);
        }
    }
}
