//! Order-revealing encryption with left/right ciphertexts (Lewi–Wu, small
//! domain blocks).
//!
//! A value is split into 8-bit blocks, most significant first. For block `i`
//! with prefix `p` (the higher blocks), a keyed permutation `π_{i,p}` hides
//! the block value:
//!
//! * left part: `F(i‖p‖π(x_i))` (16 bytes) and `π(x_i)`;
//! * right part: a nonce `r`, then for every slot `j` a trit
//!   `cmp(π⁻¹(j), y_i) + H(F(i‖p‖j), r) mod 3`.
//!
//! Comparing the left part of `x` with the right part of `y` needs no key:
//! at the first block where the prefixes still agree but the values differ,
//! the masked trit decodes to the comparison result. Each stored ciphertext
//! carries both parts, so any two are mutually comparable.

use alloc::vec::Vec;
use core::cmp::Ordering;

use hmac::{Hmac, Mac};
use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::CryptoError;

pub const BLOCK_BITS: u8 = 8;
pub const DEFAULT_WIDTH: u8 = 32;
const SLOTS: usize = 1 << BLOCK_BITS;
const TAG: usize = 16;
const NONCE: usize = 16;
const LEFT_BLOCK: usize = TAG + 1;
const RIGHT_BLOCK: usize = SLOTS / 4;

type HmacSha256 = Hmac<Sha256>;

/// Serialized length of a ciphertext of the given width.
pub fn ciphertext_len(width: u8) -> usize {
    let n = (width / BLOCK_BITS) as usize;
    1 + n * LEFT_BLOCK + NONCE + n * RIGHT_BLOCK
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OreCiphertext {
    width: u8,
    left: Vec<u8>,
    nonce: [u8; NONCE],
    right: Vec<u8>,
}

impl OreCiphertext {
    pub fn width(&self) -> u8 {
        self.width
    }

    fn blocks(&self) -> usize {
        (self.width / BLOCK_BITS) as usize
    }

    /// `width || left || nonce || right`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ciphertext_len(self.width));
        out.push(self.width);
        out.extend_from_slice(&self.left);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.right);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<OreCiphertext, CryptoError> {
        let width = *bytes.first().ok_or(CryptoError::Malformed)?;
        check_width(width)?;
        if bytes.len() != ciphertext_len(width) {
            return Err(CryptoError::Malformed);
        }
        let n = (width / BLOCK_BITS) as usize;
        let (left, rest) = bytes[1..].split_at(n * LEFT_BLOCK);
        let (nonce, right) = rest.split_at(NONCE);
        Ok(OreCiphertext {
            width,
            left: left.to_vec(),
            nonce: nonce.try_into().map_err(|_| CryptoError::Malformed)?,
            right: right.to_vec(),
        })
    }
}

fn check_width(width: u8) -> Result<(), CryptoError> {
    if width == 0 || width > 32 || width % BLOCK_BITS != 0 {
        return Err(CryptoError::UnsupportedWidth(width));
    }
    Ok(())
}

struct OreKey {
    prf: HmacSha256,
    prp: HmacSha256,
}

impl OreKey {
    fn new(master: &[u8]) -> Result<OreKey, CryptoError> {
        if master.is_empty() {
            return Err(CryptoError::EmptyKey);
        }
        let derive = |label: &[u8]| {
            let mut m = <HmacSha256 as Mac>::new_from_slice(master).expect("any key length");
            m.update(label);
            let k = m.finalize().into_bytes();
            <HmacSha256 as Mac>::new_from_slice(&k).expect("any key length")
        };
        Ok(OreKey { prf: derive(b"prf"), prp: derive(b"prp") })
    }

    fn prf(&self, block: usize, prefix: &[u8], slot: u8) -> [u8; TAG] {
        let mut m = self.prf.clone();
        m.update(&[block as u8]);
        m.update(prefix);
        m.update(&[slot]);
        let full = m.finalize().into_bytes();
        let mut out = [0u8; TAG];
        out.copy_from_slice(&full[..TAG]);
        out
    }

    /// Permutation table for block `block` under `prefix`.
    fn permutation(&self, block: usize, prefix: &[u8]) -> [u8; SLOTS] {
        let mut m = self.prp.clone();
        m.update(&[block as u8]);
        m.update(prefix);
        let seed: [u8; 32] = m.finalize().into_bytes().into();
        let mut rng = ChaCha20Rng::from_seed(seed);
        let mut perm = [0u8; SLOTS];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i as u8;
        }
        perm.shuffle(&mut rng);
        perm
    }
}

fn inverse(perm: &[u8; SLOTS]) -> [u8; SLOTS] {
    let mut inv = [0u8; SLOTS];
    for (i, &p) in perm.iter().enumerate() {
        inv[p as usize] = i as u8;
    }
    inv
}

fn mask(tag: &[u8], nonce: &[u8; NONCE]) -> u8 {
    let digest = Sha256::new().chain_update(tag).chain_update(nonce).finalize();
    let word = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
    (word % 3) as u8
}

fn cmp3(a: u8, b: u8) -> u8 {
    match a.cmp(&b) {
        Ordering::Equal => 0,
        Ordering::Less => 1,
        Ordering::Greater => 2,
    }
}

fn blocks_of(value: u32, width: u8) -> Vec<u8> {
    let n = (width / BLOCK_BITS) as usize;
    (0..n).map(|i| (value >> (8 * (n - 1 - i))) as u8).collect()
}

fn get_trit(row: &[u8], slot: u8) -> u8 {
    let s = slot as usize;
    (row[s / 4] >> (2 * (s % 4))) & 0b11
}

/// Encrypt `value` (which must fit in `width` bits).
pub fn ore_encrypt<R: RngCore + CryptoRng>(
    key: &[u8],
    value: u32,
    width: u8,
    rng: &mut R,
) -> Result<OreCiphertext, CryptoError> {
    encrypt_dyn(key, value, width, rng)
}

fn encrypt_dyn(key: &[u8], value: u32, width: u8, rng: &mut dyn RngCore) -> Result<OreCiphertext, CryptoError> {
    check_width(width)?;
    if width < 32 && value >> width != 0 {
        return Err(CryptoError::ValueOutOfRange { value, width });
    }
    let k = OreKey::new(key)?;
    let xs = blocks_of(value, width);
    let mut nonce = [0u8; NONCE];
    rng.fill_bytes(&mut nonce);
    let mut left = Vec::with_capacity(xs.len() * LEFT_BLOCK);
    let mut right = Vec::with_capacity(xs.len() * RIGHT_BLOCK);
    for (i, &x) in xs.iter().enumerate() {
        let prefix = &xs[..i];
        let perm = k.permutation(i, prefix);
        let inv = inverse(&perm);
        let px = perm[x as usize];
        left.extend_from_slice(&k.prf(i, prefix, px));
        left.push(px);
        let mut row = [0u8; RIGHT_BLOCK];
        for j in 0..SLOTS {
            let t = (cmp3(inv[j], x) + mask(&k.prf(i, prefix, j as u8), &nonce)) % 3;
            row[j / 4] |= t << (2 * (j % 4));
        }
        right.extend_from_slice(&row);
    }
    Ok(OreCiphertext { width, left, nonce, right })
}

/// Compare the plaintexts of `a` and `b` without any key.
pub fn ore_compare(a: &OreCiphertext, b: &OreCiphertext) -> Result<Ordering, CryptoError> {
    if a.width != b.width {
        return Err(CryptoError::WidthMismatch(a.width, b.width));
    }
    for i in 0..a.blocks() {
        let lb = &a.left[i * LEFT_BLOCK..(i + 1) * LEFT_BLOCK];
        let (tag, slot) = (&lb[..TAG], lb[TAG]);
        let row = &b.right[i * RIGHT_BLOCK..(i + 1) * RIGHT_BLOCK];
        let r = (get_trit(row, slot) + 3 - mask(tag, &b.nonce)) % 3;
        match r {
            0 => continue,
            1 => return Ok(Ordering::Less),
            _ => return Ok(Ordering::Greater),
        }
    }
    Ok(Ordering::Equal)
}

/// Recover the plaintext with the key by inverting the per-block permutations.
pub fn ore_decrypt(key: &[u8], ct: &OreCiphertext) -> Result<u32, CryptoError> {
    let k = OreKey::new(key)?;
    let mut prefix = Vec::with_capacity(ct.blocks());
    for i in 0..ct.blocks() {
        let lb = &ct.left[i * LEFT_BLOCK..(i + 1) * LEFT_BLOCK];
        let slot = lb[TAG];
        if k.prf(i, &prefix, slot)[..] != lb[..TAG] {
            return Err(CryptoError::Integrity);
        }
        let inv = inverse(&k.permutation(i, &prefix));
        prefix.push(inv[slot as usize]);
    }
    Ok(prefix.iter().fold(0u32, |acc, &b| (acc << 8) | b as u32))
}
