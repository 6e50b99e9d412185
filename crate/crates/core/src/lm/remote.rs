use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LanguageModel, LmError, SparseDist, TokenId, Vocabulary};

/// Body POSTed to a remote backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub context: Vec<TokenId>,
    pub prefix: Vec<TokenId>,
    pub top_n: usize,
}

/// Reply from a remote backend: the `top_n` most probable tokens in
/// descending order plus the mass of everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteResponse {
    pub entries: Vec<(TokenId, f64)>,
    pub residual: f64,
}

const RESPONSE_MASS_TOL: f64 = 1e-6;

/// Parses and validates a remote reply against a vocabulary of `vocab_size`.
pub fn decode_remote_response(body: &[u8], vocab_size: usize) -> Result<RemoteResponse, LmError> {
    let resp: RemoteResponse = serde_json::from_slice(body)
        .map_err(|e| LmError::Remote(format!("malformed response: {e}")))?;
    resp.validate(vocab_size)?;
    Ok(resp)
}

impl RemoteResponse {
    fn validate(&self, vocab_size: usize) -> Result<(), LmError> {
        let bad = |msg: String| Err(LmError::Remote(msg));
        if !(0.0..=1.0).contains(&self.residual) {
            return bad(format!("residual {} outside [0,1]", self.residual));
        }
        let mut mass = 0.0;
        for (i, &(id, p)) in self.entries.iter().enumerate() {
            if id.index() >= vocab_size {
                return bad(format!("token id {id} outside vocabulary of {vocab_size}"));
            }
            if !(p > 0.0 && p <= 1.0) {
                return bad(format!("probability {p} outside (0,1]"));
            }
            if i > 0 && self.entries[i - 1].1 < p {
                return bad("entries are not in descending probability order".into());
            }
            mass += p;
        }
        if (mass + self.residual - 1.0).abs() > RESPONSE_MASS_TOL {
            return bad(format!(
                "entries ({mass}) plus residual ({}) do not sum to 1",
                self.residual
            ));
        }
        Ok(())
    }

    /// Reported entries as a distribution; the residual is left out and so
    /// shows up as missing mass.
    pub fn into_dist(self, vocab_size: usize) -> Result<SparseDist, LmError> {
        let mut entries = self.entries;
        let scale = entries.iter().map(|e| e.1).sum::<f64>();
        if scale > 1.0 {
            // Within tolerance but over 1: pull back so SparseDist accepts it.
            entries.iter_mut().for_each(|e| e.1 /= scale);
        }
        SparseDist::new(entries, vocab_size).map_err(|e| LmError::Remote(e.to_string()))
    }
}

/// Backend that forwards each decoding step to an HTTP endpoint.
#[derive(Debug)]
pub struct RemoteLm {
    url: String,
    vocab: Vocabulary,
    top_n: usize,
    agent: ureq::Agent,
}

impl RemoteLm {
    pub fn new(url: impl Into<String>, vocab: Vocabulary, top_n: usize) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(30))
            .build();
        Self {
            url: url.into(),
            vocab,
            top_n,
            agent,
        }
    }

    /// Vocabulary file: one token per line, line `i` is token id `i`.
    pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vocabulary, LmError> {
        let text = std::fs::read_to_string(path)?;
        Vocabulary::from_tokens(text.lines())
    }
}

impl LanguageModel for RemoteLm {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_dist(
        &self,
        context: &[TokenId],
        prefix: &[TokenId],
    ) -> Result<SparseDist, LmError> {
        self.vocab.check_ids(context)?;
        self.vocab.check_ids(prefix)?;
        let req = RemoteRequest {
            context: context.to_vec(),
            prefix: prefix.to_vec(),
            top_n: self.top_n,
        };
        let resp = self
            .agent
            .post(&self.url)
            .send_json(&req)
            .map_err(|e| LmError::Remote(e.to_string()))?;
        let mut body = Vec::new();
        std::io::Read::read_to_end(&mut resp.into_reader(), &mut body)?;
        decode_remote_response(&body, self.vocab.len())?.into_dist(self.vocab.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_valid_reply() {
        let r =
            decode_remote_response(br#"{"entries":[[2,0.5],[0,0.3]],"residual":0.2}"#, 3).unwrap();
        let d = r.into_dist(3).unwrap();
        assert_eq!(d.entries(), &[(TokenId(0), 0.3), (TokenId(2), 0.5)]);
        assert!((d.total_mass() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_replies() {
        for body in [
            r#"{"entries":[[0,0.3],[1,0.5]],"residual":0.2}"#,
            r#"{"entries":[[5,0.8]],"residual":0.2}"#,
            r#"{"entries":[[0,0.5]],"residual":0.1}"#,
            r#"{"entries":[[0,0.5],[0,0.5]],"residual":0.0}"#,
            r#"{"entries":[],"residual":1.5}"#,
            r#"{"entries":[[0,0.5]]}"#,
            "not json",
        ] {
            let res = decode_remote_response(body.as_bytes(), 3).and_then(|r| r.into_dist(3));
            assert!(res.is_err(), "{body}");
        }
    }
}
