use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::{ChaCha20, Key, Nonce};
use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;
use thiserror::Error;

type HmacSha256 = Hmac<Sha256>;

/// Symmetric key shared by the two ends of a conversation.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey(pub [u8; 32]);

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SessionKey(..)")
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("ciphertext failed authentication")]
pub struct AuthError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sealed {
    pub ciphertext: Vec<u8>,
    pub tag: [u8; 32],
}

/// Authenticated encryption keyed by `(key, sequence)`. A `(key, sequence)`
/// pair must never encrypt two different plaintexts.
pub trait CipherSuite {
    fn encrypt(&self, key: &SessionKey, sequence: u64, plaintext: &[u8]) -> Sealed;
    fn decrypt(&self, key: &SessionKey, sequence: u64, ciphertext: &[u8], tag: &[u8; 32])
        -> Result<Vec<u8>, AuthError>;
}

pub(crate) fn hmac(key: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = <HmacSha256 as KeyInit>::new_from_slice(key).expect("HMAC accepts any key length");
    for p in parts {
        mac.update(p);
    }
    mac.finalize().into_bytes().into()
}

/// ChaCha20 stream encryption followed by HMAC-SHA256 over the sequence
/// number and ciphertext (encrypt-then-MAC). Cipher and MAC keys are
/// separate HMAC derivations of the session key.
#[derive(Clone, Copy, Debug, Default)]
pub struct ChaChaHmac;

impl ChaChaHmac {
    fn subkeys(key: &SessionKey) -> ([u8; 32], [u8; 32]) {
        (hmac(&key.0, &[b"encrypt"]), hmac(&key.0, &[b"authenticate"]))
    }

    fn keystream(enc_key: &[u8; 32], sequence: u64, data: &mut [u8]) {
        let mut nonce = [0u8; 12];
        nonce[4..].copy_from_slice(&sequence.to_be_bytes());
        let mut cipher = ChaCha20::new(&Key::from(*enc_key), &Nonce::from(nonce));
        cipher.apply_keystream(data);
    }

    fn tag(mac_key: &[u8; 32], sequence: u64, ciphertext: &[u8]) -> HmacSha256 {
        let mut mac = <HmacSha256 as KeyInit>::new_from_slice(mac_key).expect("HMAC accepts any key length");
        mac.update(&sequence.to_le_bytes());
        mac.update(ciphertext);
        mac
    }
}

impl CipherSuite for ChaChaHmac {
    fn encrypt(&self, key: &SessionKey, sequence: u64, plaintext: &[u8]) -> Sealed {
        let (enc_key, mac_key) = Self::subkeys(key);
        let mut ciphertext = plaintext.to_vec();
        Self::keystream(&enc_key, sequence, &mut ciphertext);
        let tag = Self::tag(&mac_key, sequence, &ciphertext)
            .finalize()
            .into_bytes()
            .into();
        Sealed { ciphertext, tag }
    }

    fn decrypt(
        &self,
        key: &SessionKey,
        sequence: u64,
        ciphertext: &[u8],
        tag: &[u8; 32],
    ) -> Result<Vec<u8>, AuthError> {
        let (enc_key, mac_key) = Self::subkeys(key);
        Self::tag(&mac_key, sequence, ciphertext)
            .verify_slice(tag)
            .map_err(|_| AuthError)?;
        let mut plaintext = ciphertext.to_vec();
        Self::keystream(&enc_key, sequence, &mut plaintext);
        Ok(plaintext)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(b: u8) -> SessionKey {
        SessionKey([b; 32])
    }

    fn shares_16_byte_window(haystack: &[u8], needle_source: &[u8]) -> bool {
        needle_source.windows(16).any(|w| haystack.windows(16).any(|h| h == w))
    }

    #[test]
    fn chacha20_matches_rfc8439_keystream() {
        // RFC 8439 section 2.4.2 test vector (block counter 1).
        let k: [u8; 32] = std::array::from_fn(|i| i as u8);
        let nonce = [0, 0, 0, 0, 0, 0, 0, 0x4a, 0, 0, 0, 0];
        let mut c = ChaCha20::new(&Key::from(k), &Nonce::from(nonce));
        let mut skip = [0u8; 64];
        c.apply_keystream(&mut skip);
        let mut data = *b"Ladies and Gentlemen of the class of '99: If I could offer you only one tip for the future, sunscreen would be it.";
        c.apply_keystream(&mut data);
        assert_eq!(hex::encode(&data[..16]), "6e2e359a2568f98041ba0728dd0d6981");
    }

    #[test]
    fn roundtrip() {
        let c = ChaChaHmac;
        for len in [0, 1, 15, 16, 17, 1000] {
            let pt: Vec<u8> = (0..len).map(|i| (i * 7) as u8).collect();
            let sealed = c.encrypt(&key(1), 42, &pt);
            assert_eq!(sealed.ciphertext.len(), pt.len());
            assert_eq!(c.decrypt(&key(1), 42, &sealed.ciphertext, &sealed.tag), Ok(pt));
        }
    }

    #[test]
    fn wrong_key_sequence_or_any_flip_fails() {
        let c = ChaChaHmac;
        let pt = vec![0x41u8; 64];
        let s = c.encrypt(&key(1), 7, &pt);
        assert_eq!(c.decrypt(&key(2), 7, &s.ciphertext, &s.tag), Err(AuthError));
        assert_eq!(c.decrypt(&key(1), 8, &s.ciphertext, &s.tag), Err(AuthError));
        for i in 0..s.ciphertext.len() {
            let mut ct = s.ciphertext.clone();
            ct[i] ^= 0x01;
            assert_eq!(c.decrypt(&key(1), 7, &ct, &s.tag), Err(AuthError));
        }
        for i in 0..32 {
            let mut tag = s.tag;
            tag[i] ^= 0x80;
            assert_eq!(c.decrypt(&key(1), 7, &s.ciphertext, &tag), Err(AuthError));
        }
        assert_eq!(c.decrypt(&key(1), 7, &s.ciphertext[..63], &s.tag), Err(AuthError));
    }

    #[test]
    fn ciphertext_is_blind_to_plaintext() {
        let c = ChaChaHmac;
        // Highly repetitive plaintext is the hardest case for substring leaks.
        let pt = vec![0u8; 4096];
        let s = c.encrypt(&key(9), 1, &pt);
        assert!(!shares_16_byte_window(&s.ciphertext, &pt));
        let s2 = c.encrypt(&key(9), 2, &pt);
        assert_ne!(s.ciphertext, s2.ciphertext);
    }
}
