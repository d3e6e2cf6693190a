//! Small shared helpers: stable hashing, counted concurrency permits,
//! token-budget truncation.

use sha2::{Digest, Sha256};
use std::sync::{Condvar, Mutex};

/// Hex SHA-256 digest of a byte string.
pub fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Short stable content key: first 16 hex chars of the SHA-256 digest.
///
/// Used wherever a compact, platform-independent identifier for a piece of
/// text is needed (mock script keys, claim/source hashes, config hashes).
pub fn short_hash(data: &str) -> String {
    sha256_hex(data.as_bytes())[..16].to_string()
}

/// Counting semaphore over std primitives. Bounds in-flight judge calls and
/// source fetches independently of how wide the surrounding thread pool is.
pub struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut available = self.permits.lock().expect("semaphore poisoned");
        while *available == 0 {
            available = self.cv.wait(available).expect("semaphore poisoned");
        }
        *available -= 1;
        SemaphoreGuard { sem: self }
    }
}

pub struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut available = self.sem.permits.lock().expect("semaphore poisoned");
        *available += 1;
        self.sem.cv.notify_one();
    }
}

/// Truncate `text` to at most `budget` tokens under the crate's whitespace
/// tokenizer. Returns the (possibly shortened) text and whether truncation
/// happened. Cuts on whitespace chunk boundaries, never inside a chunk.
pub fn truncate_tokens(text: &str, budget: usize) -> (String, bool) {
    let mut used = 0usize;
    let mut end = 0usize;
    for (offset, chunk) in split_whitespace_indices(text) {
        let chunk_tokens = crate::segment::chunk_token_count(chunk);
        if used + chunk_tokens > budget {
            return (text[..end].trim_end().to_string(), true);
        }
        used += chunk_tokens;
        end = offset + chunk.len();
    }
    (text.to_string(), false)
}

fn split_whitespace_indices(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_whitespace().map(move |chunk| {
        let offset = chunk.as_ptr() as usize - text.as_ptr() as usize;
        (offset, chunk)
    })
}
