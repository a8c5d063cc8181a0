//! Randomized encryption: AES-CBC with a fresh IV, then HMAC-SHA256.
//!
//! Layout: `IV (16) || CBC ciphertext (PKCS#7) || tag (32)`. The encryption
//! and MAC subkeys are derived from the token key so one `R_t` suffices.

use alloc::vec::Vec;

use aes::{Aes128, Aes256};
use cbc::cipher::{block_padding::Pkcs7, BlockDecryptMut, BlockEncryptMut, InnerIvInit, KeyInit};
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha2::Sha256;

use super::{AesKeySize, CryptoError};

pub const IV_LEN: usize = 16;
pub const TAG_LEN: usize = 32;
const BLOCK: usize = 16;

type HmacSha256 = Hmac<Sha256>;

fn subkey(key: &[u8], label: &[u8]) -> [u8; 32] {
    let mut m = <HmacSha256 as Mac>::new_from_slice(key).expect("any key length");
    m.update(label);
    m.finalize().into_bytes().into()
}

/// Ciphertext length for a plaintext of `len` bytes.
pub fn ciphertext_len(len: usize) -> usize {
    IV_LEN + (len / BLOCK + 1) * BLOCK + TAG_LEN
}

#[derive(Clone)]
enum Cipher {
    Aes128(Aes128),
    Aes256(Aes256),
}

/// Subkeys and key schedules of one token key, reusable across messages.
#[derive(Clone)]
pub struct RndKey {
    cipher: Cipher,
    mac: HmacSha256,
}

impl RndKey {
    pub fn new(aes: AesKeySize, key: &[u8]) -> Result<RndKey, CryptoError> {
        if key.is_empty() {
            return Err(CryptoError::EmptyKey);
        }
        let enc = subkey(key, b"cca-rnd-enc");
        let k = &enc[..aes.key_len()];
        let cipher = match aes {
            AesKeySize::Aes128 => Cipher::Aes128(Aes128::new_from_slice(k).map_err(|_| CryptoError::InvalidKeyLength(k.len()))?),
            AesKeySize::Aes256 => Cipher::Aes256(Aes256::new_from_slice(k).map_err(|_| CryptoError::InvalidKeyLength(k.len()))?),
        };
        let mac = <HmacSha256 as Mac>::new_from_slice(&subkey(key, b"cca-rnd-mac")).expect("any key length");
        Ok(RndKey { cipher, mac })
    }

    pub fn encrypt<R: RngCore + CryptoRng>(&self, plaintext: &[u8], rng: &mut R) -> Vec<u8> {
        self.encrypt_dyn(plaintext, rng)
    }

    // not generic, so callers built without optimisation still get fast code
    fn encrypt_dyn(&self, plaintext: &[u8], rng: &mut dyn RngCore) -> Vec<u8> {
        let mut iv = [0u8; IV_LEN];
        rng.fill_bytes(&mut iv);
        let body = match &self.cipher {
            Cipher::Aes128(c) => cbc::Encryptor::inner_iv_init(c.clone(), &iv.into()).encrypt_padded_vec_mut::<Pkcs7>(plaintext),
            Cipher::Aes256(c) => cbc::Encryptor::inner_iv_init(c.clone(), &iv.into()).encrypt_padded_vec_mut::<Pkcs7>(plaintext),
        };
        let mut out = Vec::with_capacity(IV_LEN + body.len() + TAG_LEN);
        out.extend_from_slice(&iv);
        out.extend_from_slice(&body);
        let t = self.mac.clone().chain_update(&out).finalize().into_bytes();
        out.extend_from_slice(&t);
        out
    }

    /// Verify and decrypt; a wrong key or modified bytes yield [`CryptoError::Integrity`].
    pub fn decrypt(&self, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
        if ciphertext.len() < IV_LEN + BLOCK + TAG_LEN || (ciphertext.len() - IV_LEN - TAG_LEN) % BLOCK != 0 {
            return Err(CryptoError::Malformed);
        }
        let (authed, t) = ciphertext.split_at(ciphertext.len() - TAG_LEN);
        self.mac.clone().chain_update(authed).verify_slice(t).map_err(|_| CryptoError::Integrity)?;
        let (iv, body) = authed.split_at(IV_LEN);
        let iv: [u8; IV_LEN] = iv.try_into().expect("IV length");
        let pt = match &self.cipher {
            Cipher::Aes128(c) => cbc::Decryptor::inner_iv_init(c.clone(), &iv.into()).decrypt_padded_vec_mut::<Pkcs7>(body),
            Cipher::Aes256(c) => cbc::Decryptor::inner_iv_init(c.clone(), &iv.into()).decrypt_padded_vec_mut::<Pkcs7>(body),
        };
        pt.map_err(|_| CryptoError::Integrity)
    }
}

pub fn rnd_encrypt<R: RngCore + CryptoRng>(
    aes: AesKeySize,
    key: &[u8],
    plaintext: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>, CryptoError> {
    Ok(RndKey::new(aes, key)?.encrypt(plaintext, rng))
}

pub fn rnd_decrypt(aes: AesKeySize, key: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    RndKey::new(aes, key)?.decrypt(ciphertext)
}
