use std::fs;
use std::path::{Path, PathBuf};

use btrs_core::params::ParamSet;
use btrs_core::ring::codec::peek_header;
use btrs_core::ring::Codec;
use btrs_core::scheme::{PublicParams, VerificationKey};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const VK_EXT: &str = "btrs-vk";
pub const SK_EXT: &str = "btrs-sk";
pub const SIG_EXT: &str = "btrs-sig";

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `base` with `ext` appended, keeping any dots already in the name.
pub fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Refuses any object carrying the secret flag.
pub fn ensure_public(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    match peek_header(bytes) {
        Ok(h) if h.tag.is_secret() => Err(CliError::Usage(format!(
            "{} holds secret key material; refusing to read it as a public object",
            path.display()
        ))),
        _ => Ok(()),
    }
}

pub fn load_vk(path: &Path) -> Result<VerificationKey, CliError> {
    let bytes = read(path)?;
    ensure_public(path, &bytes)?;
    VerificationKey::from_bytes(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// A ring file lists one verification-key path per line, in ring order.
/// Relative paths resolve against the ring file's directory; blank lines
/// and lines starting with '#' are skipped.
pub fn load_ring(path: &Path) -> Result<Vec<VerificationKey>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| load_vk(&dir.join(l)))
        .collect()
}

/// Parameters from a named set or a JSON file written by `setup`.
pub fn load_params(name: &str, file: Option<&Path>) -> Result<ParamSet, CliError> {
    match file {
        None => Ok(ParamSet::by_name(name)?),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            if let Ok(pp) = serde_json::from_str::<PublicParams>(&text) {
                return Ok(pp.params);
            }
            Ok(ParamSet::from_json(&text)?)
        }
    }
}

/// Hashes an arbitrary message down to the `t` bits the scheme signs.
pub fn message_bits(msg: &[u8], t: usize) -> Vec<bool> {
    let mut bits = Vec::with_capacity(t);
    let mut counter = 0u32;
    while bits.len() < t {
        let block = Sha256::new()
            .chain_update(b"btrs message")
            .chain_update(counter.to_le_bytes())
            .chain_update(msg)
            .finalize();
        for byte in block {
            for i in (0..8).rev() {
                bits.push(byte >> i & 1 == 1);
            }
        }
        counter += 1;
    }
    bits.truncate(t);
    bits
}
