//! Encrypted inverted index.
//!
//! Every DCFG pair `⟨t, (t', ℓ, d, o, y)⟩` becomes one entry
//!
//! ```text
//! key_ind   = DET(D_t, c_t)
//! value_ind = RND(R_t, D_t' ‖ R_t' ‖ ORE(ℓ) ‖ ORE(d) ‖ ORE(o) ‖ ORE(y))
//! ```
//!
//! where `c_t` counts the pairs of `t` from 1. Two evaluation modes relax
//! this: [`IndexMode::DetRnd`] stores the four numbers in the clear inside
//! the RND envelope, and [`IndexMode::Plain`] disables encryption entirely.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};

use unsigned_varint::{decode, encode};

use crate::crypto::rnd::RndKey;
use crate::crypto::{
    self, det::det_counter, offset_binary, ore, AesKeySize, CryptoError, HashMode, MasterKeySet,
    OreCiphertext, TokenKeyPair,
};
use crate::dcfg::{Dcfg, ExtendedToken, Symbol};

pub const MAGIC: &[u8; 7] = b"CCAIDX1";
pub const FORMAT_VERSION: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexMode {
    /// No encryption: labels and numbers as they are.
    Plain,
    /// DET keys and RND values, numbers unencrypted inside the envelope.
    DetRnd,
    /// DET, RND and ORE.
    Full,
}

impl IndexMode {
    pub const ALL: [IndexMode; 3] = [IndexMode::Plain, IndexMode::DetRnd, IndexMode::Full];

    pub fn id(self) -> u8 {
        match self {
            IndexMode::Plain => 0,
            IndexMode::DetRnd => 1,
            IndexMode::Full => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<IndexMode> {
        IndexMode::ALL.into_iter().find(|m| m.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            IndexMode::Plain => "plain",
            IndexMode::DetRnd => "det-rnd",
            IndexMode::Full => "full",
        }
    }

    pub fn from_name(name: &str) -> Option<IndexMode> {
        IndexMode::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl fmt::Display for IndexMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("index format error: {0}")]
    Format(String),
    #[error("duplicate key_ind in index")]
    DuplicateKey,
    #[error("corrupted index entry: {0}")]
    Corrupted(CryptoError),
    #[error("index/query mismatch: {0}")]
    Mismatch(String),
}

/// Header fields stored with the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexMeta {
    pub mode: IndexMode,
    pub hash: HashMode,
    pub lambda: u32,
    pub ore_width: u8,
}

impl IndexMeta {
    pub fn aes(&self) -> AesKeySize {
        AesKeySize::from_lambda(self.lambda).unwrap_or(AesKeySize::Aes128)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexEntry {
    pub key: Vec<u8>,
    pub value: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct EncryptedIndex {
    meta: IndexMeta,
    entries: Vec<IndexEntry>,
    by_key: BTreeMap<Vec<u8>, usize>,
}

impl PartialEq for EncryptedIndex {
    /// Set equality of entries plus equal metadata.
    fn eq(&self, other: &Self) -> bool {
        let sorted = |i: &EncryptedIndex| {
            let mut e = i.entries.clone();
            e.sort();
            e
        };
        self.meta == other.meta && sorted(self) == sorted(other)
    }
}

/// Sizes reported by [`EncryptedIndex::stats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexStats {
    pub entries: usize,
    pub bytes: usize,
    /// Common `value_ind` length, `None` when empty or lengths differ.
    pub value_len: Option<usize>,
}

/// Per-token material used to address the index: `(D_t, R_t)` when
/// encrypted, the label itself in plain mode.
pub fn token_handle(mode: IndexMode, mk: &MasterKeySet, label: &str) -> TokenKeyPair {
    match mode {
        IndexMode::Plain => TokenKeyPair { d: label.as_bytes().to_vec(), r: Vec::new() },
        _ => crypto::derive_token_keys(mk, label),
    }
}

/// `key_ind` for counter `c` of a token.
pub fn entry_key(meta: &IndexMeta, d: &[u8], counter: u32) -> Vec<u8> {
    match meta.mode {
        IndexMode::Plain => {
            // labels are ASCII, so the varint cannot make two keys collide
            let mut k = d.to_vec();
            put_varint(&mut k, counter);
            k
        }
        _ => det_counter(meta.hash, d, counter),
    }
}

/// One numeric field of a decoded entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Field {
    Plain(u32),
    Ore(OreCiphertext),
}

impl Field {
    /// Order of the underlying plaintexts. Fields of one index share a kind
    /// and width (checked when decoding), so the fallback arm is unreachable
    /// in practice and only keeps the order total.
    pub fn compare(&self, other: &Field) -> Ordering {
        match (self, other) {
            (Field::Plain(a), Field::Plain(b)) => a.cmp(b),
            (Field::Ore(a), Field::Ore(b)) => ore::ore_compare(a, b).unwrap_or_else(|_| a.width().cmp(&b.width())),
            (Field::Plain(_), Field::Ore(_)) => Ordering::Less,
            (Field::Ore(_), Field::Plain(_)) => Ordering::Greater,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Field::Plain(v) => v.to_be_bytes().to_vec(),
            Field::Ore(c) => c.to_bytes(),
        }
    }
}

/// A decoded `value_ind`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryValue {
    pub next: TokenKeyPair,
    /// line, depth, order, cf_type (offset-binary)
    pub fields: [Field; 4],
}

fn field_values(t: &ExtendedToken) -> [u32; 4] {
    [t.line, t.depth, t.order, offset_binary(t.cf_type)]
}

fn encode_payload<R: RngCore + CryptoRng>(
    meta: &IndexMeta,
    mk: &MasterKeySet,
    next: &TokenKeyPair,
    values: [u32; 4],
    rng: &mut R,
) -> Result<Vec<u8>, CryptoError> {
    let mut p = Vec::new();
    match meta.mode {
        IndexMode::Plain => {
            put_varint(&mut p, next.d.len() as u32);
            p.extend_from_slice(&next.d);
            for v in values {
                put_varint(&mut p, v);
            }
        }
        IndexMode::DetRnd => {
            p.extend_from_slice(&next.d);
            p.extend_from_slice(&next.r);
            for v in values {
                p.extend_from_slice(&v.to_be_bytes());
            }
        }
        IndexMode::Full => {
            p.extend_from_slice(&next.d);
            p.extend_from_slice(&next.r);
            for (key, v) in mk.ore_keys().into_iter().zip(values) {
                p.extend_from_slice(&ore::ore_encrypt(key, v, meta.ore_width, rng)?.to_bytes());
            }
        }
    }
    Ok(p)
}

/// Decode a `value_ind` with the token's `R_t`.
pub fn decode_value(meta: &IndexMeta, r: &[u8], value: &[u8]) -> Result<EntryValue, IndexError> {
    let bad = |what: &str| IndexError::Format(format!("bad entry payload: {what}"));
    let plain_fields = |b: &[u8]| -> Result<[Field; 4], IndexError> {
        if b.len() != 16 {
            return Err(bad("field length"));
        }
        Ok(core::array::from_fn(|i| {
            Field::Plain(u32::from_be_bytes(b[4 * i..4 * i + 4].try_into().expect("4 bytes")))
        }))
    };
    match meta.mode {
        IndexMode::Plain => {
            let mut r = Reader { b: value, pos: 0 };
            let n = r.varint()? as usize;
            let d = r.take(n)?.to_vec();
            let mut fields = [0u32; 4];
            for f in &mut fields {
                *f = r.varint()?;
            }
            if r.pos != value.len() {
                return Err(bad("length"));
            }
            Ok(EntryValue { next: TokenKeyPair { d, r: Vec::new() }, fields: fields.map(Field::Plain) })
        }
        IndexMode::DetRnd | IndexMode::Full => {
            let p = RndKey::new(meta.aes(), r).and_then(|k| k.decrypt(value)).map_err(IndexError::Corrupted)?;
            let h = meta.hash.output_len();
            if p.len() < 2 * h {
                return Err(bad("truncated"));
            }
            let next = TokenKeyPair { d: p[..h].to_vec(), r: p[h..2 * h].to_vec() };
            let rest = &p[2 * h..];
            let fields = if meta.mode == IndexMode::DetRnd {
                plain_fields(rest)?
            } else {
                let n = ore::ciphertext_len(meta.ore_width);
                if rest.len() != 4 * n {
                    return Err(bad("ORE length"));
                }
                let mut out = Vec::with_capacity(4);
                for i in 0..4 {
                    let c = OreCiphertext::from_bytes(&rest[i * n..(i + 1) * n]).map_err(IndexError::Corrupted)?;
                    if c.width() != meta.ore_width {
                        return Err(bad("ORE width"));
                    }
                    out.push(Field::Ore(c));
                }
                out.try_into().map_err(|_| bad("fields"))?
            };
            Ok(EntryValue { next, fields })
        }
    }
}

/// Encrypt a DCFG into an index. Entries are shuffled before storage.
pub fn build_index<R: RngCore + CryptoRng>(
    dcfg: &Dcfg,
    mk: &MasterKeySet,
    mode: IndexMode,
    rng: &mut R,
) -> Result<EncryptedIndex, IndexError> {
    build_dyn(dcfg, mk, mode, rng)
}

struct DynRng<'a>(&'a mut dyn RngCore);

impl RngCore for DynRng<'_> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

// only reachable from `build_index`, whose caller supplied a CryptoRng
impl CryptoRng for DynRng<'_> {}

fn build_dyn(dcfg: &Dcfg, mk: &MasterKeySet, mode: IndexMode, rng: &mut dyn RngCore) -> Result<EncryptedIndex, IndexError> {
    let rng = &mut DynRng(rng);
    let meta = IndexMeta { mode, hash: mk.hash, lambda: mk.lambda, ore_width: ore::DEFAULT_WIDTH };
    let mut handles: BTreeMap<Symbol, TokenKeyPair> = BTreeMap::new();
    let mut handle = |s: &Symbol| handles.entry(s.clone()).or_insert_with(|| token_handle(mode, mk, &s.label())).clone();
    let mut rnd_keys: BTreeMap<Symbol, RndKey> = BTreeMap::new();
    let mut counters: BTreeMap<Symbol, u32> = BTreeMap::new();
    let mut entries = Vec::with_capacity(dcfg.len());
    for pair in &dcfg.pairs {
        let c = counters.entry(pair.left.clone()).or_insert(0);
        *c += 1;
        let left = handle(&pair.left);
        let right = handle(&pair.right.symbol);
        let key = entry_key(&meta, &left.d, *c);
        let payload = encode_payload(&meta, mk, &right, field_values(&pair.right), rng).map_err(IndexError::Corrupted)?;
        let value = match mode {
            IndexMode::Plain => payload,
            _ => {
                let k = match rnd_keys.get(&pair.left) {
                    Some(k) => k,
                    None => {
                        let k = RndKey::new(meta.aes(), &left.r).map_err(IndexError::Corrupted)?;
                        rnd_keys.entry(pair.left.clone()).or_insert(k)
                    }
                };
                k.encrypt(&payload, rng)
            }
        };
        entries.push(IndexEntry { key, value });
    }
    entries.shuffle(rng);
    EncryptedIndex::from_entries(meta, entries)
}

impl EncryptedIndex {
    pub fn from_entries(meta: IndexMeta, entries: Vec<IndexEntry>) -> Result<EncryptedIndex, IndexError> {
        let mut by_key = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if by_key.insert(e.key.clone(), i).is_some() {
                return Err(IndexError::DuplicateKey);
            }
        }
        Ok(EncryptedIndex { meta, entries, by_key })
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    /// Entries in stored order.
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, key: &[u8]) -> Option<&[u8]> {
        self.by_key.get(key).map(|&i| self.entries[i].value.as_slice())
    }

    pub fn stats(&self) -> IndexStats {
        let mut lens = self.entries.iter().map(|e| e.value.len());
        let first = lens.next();
        let value_len = first.filter(|&l| lens.all(|x| x == l));
        IndexStats { entries: self.entries.len(), bytes: self.serialized_len(), value_len }
    }

    fn serialized_len(&self) -> usize {
        let v = |n: usize| encode::u32(n as u32, &mut encode::u32_buffer()).len();
        MAGIC.len() + 1 + 1 + 1 + 2 + 1 + 4 + self.entries.iter().map(|e| v(e.key.len()) + e.key.len() + v(e.value.len()) + e.value.len()).sum::<usize>()
    }

    /// `CCAIDX1 | version | mode | hash | lambda(u16) | ore_width | count(u32) | records`,
    /// each record `key_len key val_len value` with LEB128 lengths; fixed
    /// integers are big-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.push(self.meta.mode.id());
        out.push(self.meta.hash.id());
        out.extend_from_slice(&(self.meta.lambda as u16).to_be_bytes());
        out.push(self.meta.ore_width);
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for e in &self.entries {
            put_varint(&mut out, e.key.len() as u32);
            out.extend_from_slice(&e.key);
            put_varint(&mut out, e.value.len() as u32);
            out.extend_from_slice(&e.value);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<EncryptedIndex, IndexError> {
        let mut r = Reader { b: bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(IndexError::Format("bad magic".to_string()));
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(IndexError::Format(format!("unsupported version {version}")));
        }
        let mode = IndexMode::from_id(r.u8()?).ok_or_else(|| IndexError::Format("bad mode".to_string()))?;
        let hash = HashMode::from_id(r.u8()?).ok_or_else(|| IndexError::Format("bad hash mode".to_string()))?;
        let lambda = r.u16()? as u32;
        AesKeySize::from_lambda(lambda).map_err(|e| IndexError::Format(e.to_string()))?;
        let ore_width = r.u8()?;
        if ore_width == 0 || ore_width > 32 || ore_width % 8 != 0 {
            return Err(IndexError::Format(format!("bad ORE width {ore_width}")));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let kl = r.varint()? as usize;
            let key = r.take(kl)?.to_vec();
            let vl = r.varint()? as usize;
            let value = r.take(vl)?.to_vec();
            entries.push(IndexEntry { key, value });
        }
        if r.pos != bytes.len() {
            return Err(IndexError::Format("trailing bytes".to_string()));
        }
        EncryptedIndex::from_entries(IndexMeta { mode, hash, lambda, ore_width }, entries)
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.b.len());
        let end = end.ok_or_else(|| IndexError::Format("truncated".to_string()))?;
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, IndexError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn varint(&mut self) -> Result<u32, IndexError> {
        let (v, rest) = decode::u32(&self.b[self.pos..]).map_err(|e| IndexError::Format(format!("bad varint: {e}")))?;
        self.pos = self.b.len() - rest.len();
        Ok(v)
    }
}

fn put_varint(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(encode::u32(v, &mut encode::u32_buffer()));
}
