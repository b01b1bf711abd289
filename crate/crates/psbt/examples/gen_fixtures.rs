//! Regenerates `fixtures/` with rust-bitcoin and libsecp256k1.
//!
//! Keys, amounts and outpoints are derived from fixed labels and signing uses
//! RFC 6979 nonces, so every run writes identical files.
//!
//!     cargo run -p blindroom-psbt --example gen_fixtures

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use bitcoin::bip32::{DerivationPath, Fingerprint};
use bitcoin::blockdata::opcodes::all::OP_CHECKMULTISIG;
use bitcoin::blockdata::script::{Builder, PushBytesBuf};
use bitcoin::consensus::encode::serialize_hex;
use bitcoin::hashes::{sha256, Hash};
use bitcoin::psbt::Psbt;
use bitcoin::secp256k1::{Message, Secp256k1, SecretKey};
use bitcoin::sighash::{EcdsaSighashType, SighashCache};
use bitcoin::transaction::Version;
use bitcoin::{
    absolute, ecdsa, Amount, OutPoint, PublicKey, ScriptBuf, Sequence, Transaction, TxIn, TxOut, Txid, Witness,
};

const SIGNERS: [&str; 3] = ["a", "b", "c"];

fn secret(label: &str) -> SecretKey {
    let digest = sha256::Hash::hash(format!("blindroom fixture key {label}").as_bytes());
    SecretKey::from_slice(digest.as_byte_array()).expect("hash is a valid scalar")
}

fn pubkey(label: &str) -> PublicKey {
    PublicKey::new(secret(label).public_key(&Secp256k1::new()))
}

fn multisig(m: i64, labels: &[&str]) -> ScriptBuf {
    let mut b = Builder::new().push_int(m);
    for l in labels {
        b = b.push_key(&pubkey(l));
    }
    b.push_int(labels.len() as i64).push_opcode(OP_CHECKMULTISIG).into_script()
}

fn funding_outpoint(label: &str) -> OutPoint {
    let digest = sha256::Hash::hash(format!("blindroom fixture funding {label}").as_bytes());
    OutPoint { txid: Txid::from_byte_array(digest.to_byte_array()), vout: 1 }
}

enum Wrap {
    Native,
    Nested,
}

struct SpendInput {
    witness_script: ScriptBuf,
    wrap: Wrap,
    amount: Amount,
    outpoint: OutPoint,
    key_order: Vec<&'static str>,
}

impl SpendInput {
    fn redeem_script(&self) -> Option<ScriptBuf> {
        match self.wrap {
            Wrap::Native => None,
            Wrap::Nested => Some(ScriptBuf::new_p2wsh(&self.witness_script.wscript_hash())),
        }
    }

    fn script_pubkey(&self) -> ScriptBuf {
        match self.redeem_script() {
            None => ScriptBuf::new_p2wsh(&self.witness_script.wscript_hash()),
            Some(rs) => ScriptBuf::new_p2sh(&rs.script_hash()),
        }
    }
}

struct Scenario {
    name: &'static str,
    inputs: Vec<SpendInput>,
    outputs: Vec<TxOut>,
}

fn unsigned_psbt(s: &Scenario) -> Psbt {
    let tx = Transaction {
        version: Version::TWO,
        lock_time: absolute::LockTime::ZERO,
        input: s
            .inputs
            .iter()
            .map(|i| TxIn {
                previous_output: i.outpoint,
                script_sig: ScriptBuf::new(),
                sequence: Sequence::ENABLE_RBF_NO_LOCKTIME,
                witness: Witness::new(),
            })
            .collect(),
        output: s.outputs.clone(),
    };
    let mut psbt = Psbt::from_unsigned_tx(tx).expect("unsigned");
    for (input, spend) in psbt.inputs.iter_mut().zip(&s.inputs) {
        input.witness_utxo = Some(TxOut { value: spend.amount, script_pubkey: spend.script_pubkey() });
        input.witness_script = Some(spend.witness_script.clone());
        input.redeem_script = spend.redeem_script();
        for (n, label) in spend.key_order.iter().enumerate() {
            let path = DerivationPath::from_str(&format!("m/48'/1'/0'/2'/0/{n}")).unwrap();
            let fp = Fingerprint::from([0xb1, 0x0d, 0x00, label.as_bytes()[0]]);
            input.bip32_derivation.insert(pubkey(label).inner, (fp, path));
        }
    }
    psbt
}

fn sign(psbt: &Psbt, s: &Scenario, label: &str) -> Psbt {
    let secp = Secp256k1::new();
    let mut out = psbt.clone();
    let mut cache = SighashCache::new(&psbt.unsigned_tx);
    for (index, spend) in s.inputs.iter().enumerate() {
        let hash = cache
            .p2wsh_signature_hash(index, &spend.witness_script, spend.amount, EcdsaSighashType::All)
            .expect("index in range");
        let msg = Message::from_digest(hash.to_byte_array());
        let sig = secp.sign_ecdsa(&msg, &secret(label));
        out.inputs[index]
            .partial_sigs
            .insert(pubkey(label), ecdsa::Signature { signature: sig, sighash_type: EcdsaSighashType::All });
    }
    out
}

/// Witness stack for the chosen signers, ordered as the script lists keys.
fn final_tx(signed: &BTreeMap<&str, Psbt>, s: &Scenario, pair: [&str; 2]) -> Transaction {
    let mut tx = signed[pair[0]].unsigned_tx.clone();
    for (index, spend) in s.inputs.iter().enumerate() {
        let mut stack: Vec<Vec<u8>> = vec![Vec::new()];
        for label in &spend.key_order {
            if pair.contains(label) {
                let sig = &signed[label].inputs[index].partial_sigs[&pubkey(label)];
                stack.push(sig.to_vec());
            }
        }
        stack.push(spend.witness_script.to_bytes());
        tx.input[index].witness = Witness::from_slice(&stack);
        if let Some(rs) = spend.redeem_script() {
            tx.input[index].script_sig = Builder::new().push_slice(PushBytesBuf::try_from(rs.to_bytes()).unwrap()).into_script();
        }
    }
    tx
}

fn write_psbt(dir: &Path, name: &str, psbt: &Psbt) {
    fs::write(dir.join(name), format!("{}\n", STANDARD.encode(psbt.serialize()))).unwrap();
}

fn generate(root: &Path, s: &Scenario) {
    let dir = root.join(s.name);
    fs::create_dir_all(&dir).unwrap();
    let unsigned = unsigned_psbt(s);
    write_psbt(&dir, "unsigned.psbt", &unsigned);

    let mut signed = BTreeMap::new();
    for label in SIGNERS {
        let p = sign(&unsigned, s, label);
        write_psbt(&dir, &format!("signed_{label}.psbt"), &p);
        signed.insert(label, p);
    }
    write_psbt(&dir, "extraneous_d.psbt", &sign(&unsigned, s, "d"));

    let mut combined = signed["a"].clone();
    combined.combine(signed["b"].clone()).unwrap();
    write_psbt(&dir, "combined_ab.psbt", &combined);

    // Nested inputs put the redeem script push into scriptSig, which the txid
    // covers, so only all-native transactions keep the skeleton's txid.
    let all_native = s.inputs.iter().all(|i| matches!(i.wrap, Wrap::Native));
    let txid = final_tx(&signed, s, ["a", "b"]).compute_txid();
    assert_eq!(all_native, txid == unsigned.unsigned_tx.compute_txid());
    for pair in [["a", "b"], ["a", "c"], ["b", "c"]] {
        let tx = final_tx(&signed, s, pair);
        assert_eq!(tx.compute_txid(), txid);
        fs::write(dir.join(format!("final_{}{}.hex", pair[0], pair[1])), format!("{}\n", serialize_hex(&tx))).unwrap();
    }
    fs::write(dir.join("txid.txt"), format!("{txid}\n")).unwrap();
    println!("{}: txid {txid}", s.name);
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let abc = ["a", "b", "c"];
    let change = multisig(2, &abc);
    let pay_to = ScriptBuf::new_p2wpkh(&pubkey("d").wpubkey_hash().expect("compressed"));
    let outputs = vec![
        TxOut { value: Amount::from_sat(100_000), script_pubkey: pay_to },
        TxOut { value: Amount::from_sat(48_590), script_pubkey: ScriptBuf::new_p2wsh(&change.wscript_hash()) },
    ];

    generate(
        &root,
        &Scenario {
            name: "p2wsh_2of3",
            inputs: vec![SpendInput {
                witness_script: multisig(2, &abc),
                wrap: Wrap::Native,
                amount: Amount::from_sat(150_000),
                outpoint: funding_outpoint("0"),
                key_order: abc.to_vec(),
            }],
            outputs: outputs.clone(),
        },
    );

    let cab = ["c", "a", "b"];
    generate(
        &root,
        &Scenario {
            name: "mixed_2of3",
            inputs: vec![
                SpendInput {
                    witness_script: multisig(2, &abc),
                    wrap: Wrap::Native,
                    amount: Amount::from_sat(90_000),
                    outpoint: funding_outpoint("1"),
                    key_order: abc.to_vec(),
                },
                SpendInput {
                    witness_script: multisig(2, &cab),
                    wrap: Wrap::Nested,
                    amount: Amount::from_sat(60_000),
                    outpoint: funding_outpoint("2"),
                    key_order: cab.to_vec(),
                },
            ],
            outputs,
        },
    );
}
