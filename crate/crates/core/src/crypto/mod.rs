//! DET, RND and ORE schemes plus master and per-token key handling.

pub mod det;
pub mod ore;
pub mod rnd;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{CryptoRng, RngCore};

pub use det::det_encrypt;
pub use ore::{ore_compare, ore_decrypt, ore_encrypt, OreCiphertext};
pub use rnd::{rnd_decrypt, rnd_encrypt};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("unsupported security parameter {0} (expected 128 or 256)")]
    UnsupportedSecurityParameter(u32),
    #[error("key must not be empty")]
    EmptyKey,
    #[error("invalid key length {0}")]
    InvalidKeyLength(usize),
    #[error("authenticated decryption failed")]
    Integrity,
    #[error("malformed ciphertext")]
    Malformed,
    #[error("ORE width mismatch: {0} vs {1} bits")]
    WidthMismatch(u8, u8),
    #[error("unsupported ORE width {0} (multiple of 8 up to 32)")]
    UnsupportedWidth(u8),
    #[error("value {value} does not fit in {width} bits")]
    ValueOutOfRange { value: u32, width: u8 },
}

/// MAC used by the DET scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HashMode {
    #[default]
    Sha1,
    Sha256,
}

impl HashMode {
    pub fn output_len(self) -> usize {
        match self {
            HashMode::Sha1 => 20,
            HashMode::Sha256 => 32,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashMode::Sha1 => "sha1",
            HashMode::Sha256 => "sha256",
        }
    }

    pub fn from_name(name: &str) -> Option<HashMode> {
        match name.to_ascii_lowercase().as_str() {
            "sha1" | "sha-1" => Some(HashMode::Sha1),
            "sha256" | "sha-256" => Some(HashMode::Sha256),
            _ => None,
        }
    }

    pub fn id(self) -> u8 {
        match self {
            HashMode::Sha1 => 1,
            HashMode::Sha256 => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<HashMode> {
        match id {
            1 => Some(HashMode::Sha1),
            2 => Some(HashMode::Sha256),
            _ => None,
        }
    }
}

/// AES variant used inside RND, chosen by the security parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AesKeySize {
    Aes128,
    Aes256,
}

impl AesKeySize {
    pub fn from_lambda(lambda: u32) -> Result<AesKeySize, CryptoError> {
        match lambda {
            128 => Ok(AesKeySize::Aes128),
            256 => Ok(AesKeySize::Aes256),
            other => Err(CryptoError::UnsupportedSecurityParameter(other)),
        }
    }

    pub fn key_len(self) -> usize {
        match self {
            AesKeySize::Aes128 => 16,
            AesKeySize::Aes256 => 32,
        }
    }
}

/// The six developer-side master keys.
#[derive(Clone, PartialEq, Eq)]
pub struct MasterKeySet {
    pub lambda: u32,
    pub hash: HashMode,
    pub k_d: Vec<u8>,
    pub k_r: Vec<u8>,
    pub k_line: Vec<u8>,
    pub k_depth: Vec<u8>,
    pub k_order: Vec<u8>,
    pub k_type: Vec<u8>,
}

impl fmt::Debug for MasterKeySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MasterKeySet")
            .field("lambda", &self.lambda)
            .field("hash", &self.hash)
            .finish_non_exhaustive()
    }
}

impl MasterKeySet {
    /// Six fresh independent keys of `lambda / 8` bytes.
    pub fn generate<R: RngCore + CryptoRng>(
        lambda: u32,
        hash: HashMode,
        rng: &mut R,
    ) -> Result<MasterKeySet, CryptoError> {
        AesKeySize::from_lambda(lambda)?;
        let len = lambda as usize / 8;
        let mut key = || {
            let mut k = vec![0u8; len];
            rng.fill_bytes(&mut k);
            k
        };
        Ok(MasterKeySet {
            lambda,
            hash,
            k_d: key(),
            k_r: key(),
            k_line: key(),
            k_depth: key(),
            k_order: key(),
            k_type: key(),
        })
    }

    /// Rebuild from stored keys, checking lengths.
    pub fn from_keys(lambda: u32, hash: HashMode, keys: [Vec<u8>; 6]) -> Result<MasterKeySet, CryptoError> {
        AesKeySize::from_lambda(lambda)?;
        if let Some(bad) = keys.iter().find(|k| k.len() != lambda as usize / 8) {
            return Err(CryptoError::InvalidKeyLength(bad.len()));
        }
        let [k_d, k_r, k_line, k_depth, k_order, k_type] = keys;
        Ok(MasterKeySet { lambda, hash, k_d, k_r, k_line, k_depth, k_order, k_type })
    }

    pub fn keys(&self) -> [&[u8]; 6] {
        [&self.k_d, &self.k_r, &self.k_line, &self.k_depth, &self.k_order, &self.k_type]
    }

    /// ORE keys for line, depth, order and cf_type.
    pub fn ore_keys(&self) -> [&[u8]; 4] {
        [&self.k_line, &self.k_depth, &self.k_order, &self.k_type]
    }

    pub fn aes(&self) -> AesKeySize {
        AesKeySize::from_lambda(self.lambda).unwrap_or(AesKeySize::Aes128)
    }
}

/// `(D_t, R_t)` for one token label.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenKeyPair {
    pub d: Vec<u8>,
    pub r: Vec<u8>,
}

impl fmt::Debug for TokenKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TokenKeyPair(..)")
    }
}

/// `D_t = DET(K_D, t)`, `R_t = DET(K_R, t)`.
pub fn derive_token_keys(mk: &MasterKeySet, label: &str) -> TokenKeyPair {
    // master keys are never empty, so DET cannot fail here
    let det = |k: &[u8]| det::mac(mk.hash, k, label.as_bytes());
    TokenKeyPair { d: det(&mk.k_d), r: det(&mk.k_r) }
}

/// Order-preserving map from signed to unsigned 32-bit values.
pub fn offset_binary(v: i32) -> u32 {
    (v as u32) ^ 0x8000_0000
}

pub fn from_offset_binary(v: u32) -> i32 {
    (v ^ 0x8000_0000) as i32
}
