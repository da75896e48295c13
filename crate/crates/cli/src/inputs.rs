//! Party input parsing. Values map onto input wires least significant bit
//! first.

use rand::Rng;

use crate::{usage, CliError};

/// Parses `value` into exactly `width` bits.
pub fn parse_input(value: &str, width: usize) -> Result<Vec<bool>, CliError> {
    let v = value.trim();
    let mut bits: Vec<bool> = if let Some(hex) = v.strip_prefix("0x") {
        let mut out = Vec::with_capacity(hex.len() * 4);
        for c in hex.chars().rev().filter(|&c| c != '_') {
            let d = c
                .to_digit(16)
                .ok_or_else(|| usage(format!("bad hex digit `{c}` in `{value}`")))?;
            out.extend((0..4).map(|i| d >> i & 1 == 1));
        }
        out
    } else if let Some(bin) = v.strip_prefix("0b") {
        bin.chars()
            .rev()
            .filter(|&c| c != '_')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(usage(format!("bad binary digit `{c}` in `{value}`"))),
            })
            .collect::<Result<_, _>>()?
    } else {
        let n: u64 = v
            .parse()
            .map_err(|_| usage(format!("input `{value}` is not a number")))?;
        (0..64).map(|i| n >> i & 1 == 1).collect()
    };
    if bits.iter().skip(width).any(|&b| b) {
        return Err(usage(format!("input `{value}` does not fit in {width} bits")));
    }
    bits.resize(width, false);
    Ok(bits)
}

pub fn input_or_random<R: Rng>(value: Option<&str>, width: usize, rng: &mut R) -> Result<Vec<bool>, CliError> {
    match value {
        Some(v) => parse_input(v, width),
        None => Ok((0..width).map(|_| rng.gen()).collect()),
    }
}

/// Renders bits in wire order as a `0`/`1` string.
pub fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_agree() {
        let want = vec![true, false, true, true, false, false];
        assert_eq!(parse_input("13", 6).unwrap(), want);
        assert_eq!(parse_input("0xd", 6).unwrap(), want);
        assert_eq!(parse_input("0b1101", 6).unwrap(), want);
        assert!(parse_input("64", 6).is_err());
        assert!(parse_input("0xzz", 6).is_err());
        assert!(parse_input("0x1_00", 12).unwrap()[8]);
        assert_eq!(bit_string(&want), "101100");
    }
}
