//! ULID-style sortable job identifiers and random session tokens.

use std::sync::Mutex;

const CROCKFORD: &[u8; 32] = b"0123456789ABCDEFGHJKMNPQRSTVWXYZ";

/// Generates 26-character identifiers: 48-bit millisecond timestamp followed
/// by 80 random bits, Crockford base32. Within one millisecond the random
/// part is incremented so ids stay strictly increasing.
#[derive(Debug, Default)]
pub struct IdGenerator {
    last: Mutex<(u64, u128)>,
}

impl IdGenerator {
    pub fn next(&self, now: f64) -> String {
        let ms = (now * 1000.0).max(0.0) as u64 & ((1 << 48) - 1);
        let mut last = self.last.lock().unwrap_or_else(|p| p.into_inner());
        let random = if ms <= last.0 {
            last.1 + 1
        } else {
            rand::random::<u128>() & ((1u128 << 79) - 1)
        };
        let ms = ms.max(last.0);
        *last = (ms, random);
        encode(((ms as u128) << 80) | (random & ((1u128 << 80) - 1)))
    }
}

fn encode(mut v: u128) -> String {
    let mut out = [0u8; 26];
    for slot in out.iter_mut().rev() {
        *slot = CROCKFORD[(v & 31) as usize];
        v >>= 5;
    }
    String::from_utf8(out.to_vec()).unwrap()
}

/// Random 128-bit token rendered as 32 hex digits.
pub fn new_session_token() -> String {
    format!("{:032x}", rand::random::<u128>())
}

/// Seed derived from the clock and job id, used when the submitter pins none.
pub(crate) fn time_seed(now: f64, salt: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ now.to_bits();
    for b in salt.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
