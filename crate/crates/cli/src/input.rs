use std::io::Read;
use std::path::Path;

use blindroom_psbt::Psbt;

use crate::exit::CliError;

const MAGIC: &[u8] = b"psbt\xff";

/// Parses binary or base64 PSBT bytes, telling them apart by the magic.
pub fn parse_psbt_bytes(bytes: &[u8]) -> Result<Psbt, CliError> {
    if bytes.starts_with(MAGIC) {
        return Psbt::parse(bytes).map_err(|e| CliError::protocol(format!("not a valid psbt: {e}")));
    }
    let text = std::str::from_utf8(bytes).map_err(|_| CliError::protocol("not a psbt: neither binary nor base64"))?;
    let compact: String = text.split_whitespace().collect();
    Psbt::from_base64(&compact).map_err(|e| CliError::protocol(format!("not a valid psbt: {e}")))
}

/// Reads a PSBT from a file, or from stdin for `-`.
pub fn load_psbt(path: &Path) -> Result<Psbt, CliError> {
    let bytes = if path == Path::new("-") {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).map_err(|e| CliError::usage(format!("cannot read stdin: {e}")))?;
        buf
    } else {
        std::fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?
    };
    parse_psbt_bytes(&bytes)
}
