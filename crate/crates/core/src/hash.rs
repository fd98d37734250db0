//! Content hashing helpers. SHA-256 everywhere, hex-encoded.

use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::Path;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Hash a directory's regular files: sorted relative paths and contents.
/// Stable across platforms as long as file bytes are identical.
pub fn sha256_dir(dir: &Path) -> io::Result<String> {
    let mut paths = Vec::new();
    collect_files(dir, dir, &mut paths)?;
    paths.sort();
    let mut hasher = Sha256::new();
    for rel in &paths {
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update(fs::read(dir.join(rel))?);
        hasher.update([0u8]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("child path under root")
                .to_string_lossy()
                .replace('\\', "/");
            out.push(rel);
        }
    }
    Ok(())
}

/// First 8 bytes of SHA-256 over the concatenated parts, as a u64 seed.
pub fn stable_seed(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
        hasher.update([0xff]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest >= 8 bytes"))
}
