//! Request/response journaling so any run is re-playable offline.
//!
//! One JSON line per sample: key, request, response, wall-clock timestamps.
//! The logical hash covers key/request/response only, so two runs with
//! identical traffic share a hash even though timestamps differ.

use super::{
    BackendError, GenerationBackend, GenerationRequest, ModelOutput, SampleFailure,
    SampleOutcome, TokenSample,
};
use crate::hash;
use crate::prompts::PromptCategory;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JournalKey {
    pub post_id: String,
    pub category: PromptCategory,
    pub sample_index: usize,
}

impl JournalKey {
    pub fn display(&self) -> String {
        format!(
            "({}, {}, {})",
            self.post_id,
            self.category.code(),
            self.sample_index
        )
    }

    fn ord_key(&self) -> (String, usize, usize) {
        (self.post_id.clone(), self.category.index(), self.sample_index)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JournalRequest {
    pub prompt_sha256: String,
    /// Full prompt text as sent, so the journal is self-contained.
    pub prompt_body: String,
    pub seed: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JournalResponse {
    Tokens { tokens: Vec<TokenSample> },
    Error { error: String },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

impl Timestamps {
    pub fn now_span(started: SystemTime) -> Timestamps {
        let to_ms = |t: SystemTime| {
            t.duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0)
        };
        Timestamps {
            started_unix_ms: to_ms(started),
            finished_unix_ms: to_ms(SystemTime::now()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JournalEntry {
    pub key: JournalKey,
    pub request: JournalRequest,
    pub response: JournalResponse,
    pub timestamps: Timestamps,
}

impl JournalEntry {
    pub fn from_outcome(
        request: &GenerationRequest,
        model: &str,
        sample_index: usize,
        outcome: &SampleOutcome,
        started: SystemTime,
    ) -> JournalEntry {
        JournalEntry {
            key: JournalKey {
                post_id: request.prompt.post_id.clone(),
                category: request.prompt.category,
                sample_index,
            },
            request: JournalRequest {
                prompt_sha256: request.prompt.sha256(),
                prompt_body: request.prompt.body.clone(),
                seed: request.seeds[sample_index],
                temperature: request.temperature,
                max_tokens: request.max_tokens,
                model: model.to_string(),
            },
            response: match outcome {
                Ok(output) => JournalResponse::Tokens {
                    tokens: output.tokens.clone(),
                },
                Err(failure) => JournalResponse::Error {
                    error: failure.reason.clone(),
                },
            },
            timestamps: Timestamps::now_span(started),
        }
    }
}

/// Append-only journal writer.
pub struct JournalWriter {
    writer: BufWriter<File>,
    path: PathBuf,
}

impl JournalWriter {
    pub fn create(path: &Path) -> Result<JournalWriter, BackendError> {
        let file = File::create(path).map_err(|e| BackendError::Journal {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(JournalWriter {
            writer: BufWriter::new(file),
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, entry: &JournalEntry) -> Result<(), BackendError> {
        let line = serde_json::to_string(entry).expect("serializable journal entry");
        writeln!(self.writer, "{line}").map_err(|e| BackendError::Journal {
            path: self.path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn finish(mut self) -> Result<(), BackendError> {
        self.writer.flush().map_err(|e| BackendError::Journal {
            path: self.path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// A loaded journal, indexed by key.
pub struct Journal {
    entries: BTreeMap<(String, usize, usize), JournalEntry>,
    path: PathBuf,
}

impl Journal {
    pub fn load(path: &Path) -> Result<Journal, BackendError> {
        let file = File::open(path).map_err(|e| BackendError::Journal {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut entries = BTreeMap::new();
        for (line_no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| BackendError::Journal {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: JournalEntry =
                serde_json::from_str(&line).map_err(|e| BackendError::Journal {
                    path: path.display().to_string(),
                    message: format!("line {}: {}", line_no + 1, e),
                })?;
            entries.insert(entry.key.ord_key(), entry);
        }
        Ok(Journal {
            entries,
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &JournalKey) -> Option<&JournalEntry> {
        self.entries.get(&key.ord_key())
    }

    /// Hash over key/request/response of every entry in key order.
    /// Timestamps are excluded so re-recorded identical traffic matches.
    pub fn logical_sha256(&self) -> String {
        let mut payload = String::new();
        for entry in self.entries.values() {
            let stripped = serde_json::json!({
                "key": entry.key,
                "request": entry.request,
                "response": entry.response,
            });
            payload.push_str(&stripped.to_string());
            payload.push('\n');
        }
        hash::sha256_hex(payload.as_bytes())
    }

    /// Verify the journal covers every expected (post, category, sample) key
    /// and that recorded prompt hashes match the re-rendered prompts.
    pub fn validate_coverage(
        &self,
        expected: &[(JournalKey, String)],
    ) -> Result<(), BackendError> {
        let mut missing = Vec::new();
        for (key, prompt_sha256) in expected {
            match self.get(key) {
                None => missing.push(key.display()),
                Some(entry) => {
                    if &entry.request.prompt_sha256 != prompt_sha256 {
                        return Err(BackendError::JournalDrift {
                            key: key.display(),
                        });
                    }
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(BackendError::JournalGap { missing })
        }
    }
}

/// Backend that replays journaled responses; no network.
pub struct ReplayBackend<'a> {
    journal: &'a Journal,
    model_name: String,
}

impl<'a> ReplayBackend<'a> {
    pub fn new(journal: &'a Journal) -> ReplayBackend<'a> {
        let model_name = journal
            .entries
            .values()
            .next()
            .map(|e| e.request.model.clone())
            .unwrap_or_else(|| "replay".to_string());
        ReplayBackend {
            journal,
            model_name,
        }
    }
}

impl GenerationBackend for ReplayBackend<'_> {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn probe(&self) -> Result<(), BackendError> {
        Ok(())
    }

    fn sample(&self, request: &GenerationRequest) -> Vec<SampleOutcome> {
        let request_id = request.request_id();
        (0..request.samples_k)
            .map(|i| {
                let key = JournalKey {
                    post_id: request.prompt.post_id.clone(),
                    category: request.prompt.category,
                    sample_index: i,
                };
                match self.journal.get(&key) {
                    Some(entry) => match &entry.response {
                        JournalResponse::Tokens { tokens } => Ok(ModelOutput::from_tokens(
                            &request_id,
                            i,
                            tokens.clone(),
                            &entry.request.model,
                        )),
                        JournalResponse::Error { error } => Err(SampleFailure {
                            sample_index: i,
                            reason: error.clone(),
                        }),
                    },
                    None => Err(SampleFailure {
                        sample_index: i,
                        reason: format!("journal gap at {}", key.display()),
                    }),
                }
            })
            .collect()
    }
}
