//! The signed fixture sets, compiled in. Golden transactions come from the
//! reference implementation that generated the fixtures.

use blindroom_psbt::Psbt;

pub struct FixtureSet {
    pub name: &'static str,
    unsigned: &'static str,
    signed: [&'static str; 3],
    extraneous: &'static str,
    combined_ab: &'static str,
    finals: [(&'static str, &'static str); 3],
    txid: &'static str,
    /// Every input is native P2WSH, so the final txid equals the skeleton's.
    pub all_native: bool,
}

macro_rules! fixture_set {
    ($name:literal, $native:expr) => {
        FixtureSet {
            name: $name,
            unsigned: include_str!(concat!("../../psbt/fixtures/", $name, "/unsigned.psbt")),
            signed: [
                include_str!(concat!("../../psbt/fixtures/", $name, "/signed_a.psbt")),
                include_str!(concat!("../../psbt/fixtures/", $name, "/signed_b.psbt")),
                include_str!(concat!("../../psbt/fixtures/", $name, "/signed_c.psbt")),
            ],
            extraneous: include_str!(concat!("../../psbt/fixtures/", $name, "/extraneous_d.psbt")),
            combined_ab: include_str!(concat!("../../psbt/fixtures/", $name, "/combined_ab.psbt")),
            finals: [
                ("ab", include_str!(concat!("../../psbt/fixtures/", $name, "/final_ab.hex"))),
                ("ac", include_str!(concat!("../../psbt/fixtures/", $name, "/final_ac.hex"))),
                ("bc", include_str!(concat!("../../psbt/fixtures/", $name, "/final_bc.hex"))),
            ],
            txid: include_str!(concat!("../../psbt/fixtures/", $name, "/txid.txt")),
            all_native: $native,
        }
    };
}

pub static P2WSH_2OF3: FixtureSet = fixture_set!("p2wsh_2of3", true);
pub static MIXED_2OF3: FixtureSet = fixture_set!("mixed_2of3", false);

pub fn all() -> [&'static FixtureSet; 2] {
    [&P2WSH_2OF3, &MIXED_2OF3]
}

pub fn by_name(name: &str) -> Option<&'static FixtureSet> {
    all().into_iter().find(|f| f.name == name)
}

fn parse(text: &str) -> Psbt {
    Psbt::from_base64(text.trim()).expect("fixture parses")
}

impl FixtureSet {
    pub fn unsigned(&self) -> Psbt {
        parse(self.unsigned)
    }

    /// Signer `a`, `b` or `c`.
    pub fn signed(&self, signer: char) -> Psbt {
        parse(self.signed[signer_index(signer)])
    }

    /// Signed by a key outside every script.
    pub fn extraneous(&self) -> Psbt {
        parse(self.extraneous)
    }

    /// The reference combiner's merge of `a` and `b`.
    pub fn combined_ab(&self) -> Psbt {
        parse(self.combined_ab)
    }

    /// Golden final transaction for two signers, in any order.
    pub fn final_hex(&self, x: char, y: char) -> &'static str {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        let pair = format!("{x}{y}");
        self.finals.iter().find(|(p, _)| *p == pair).map(|(_, h)| h.trim()).expect("pair of distinct signers")
    }

    pub fn finals(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.finals.iter().map(|(_, h)| h.trim())
    }

    pub fn txid(&self) -> &'static str {
        self.txid.trim()
    }
}

fn signer_index(signer: char) -> usize {
    match signer {
        'a' => 0,
        'b' => 1,
        'c' => 2,
        other => panic!("no fixture signer {other:?}"),
    }
}
