use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Environment variable holding the bearer token for the scoring endpoint.
pub const TOKEN_ENV: &str = "HOLO_LLM_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Informativeness,
    Coherence,
    Humanness,
}

pub const ASPECTS: [Aspect; 3] = [
    Aspect::Informativeness,
    Aspect::Coherence,
    Aspect::Humanness,
];

impl Aspect {
    pub fn name(self) -> &'static str {
        match self {
            Aspect::Informativeness => "informativeness",
            Aspect::Coherence => "coherence",
            Aspect::Humanness => "humanness",
        }
    }

    pub fn criterion(self) -> &'static str {
        match self {
            Aspect::Informativeness => "Informativeness: Informativeness is used for evaluating whether the response contains the semantic relevant information in the dialogue history. 1 score means the response just repeats the dialogue history and fails to provide additional information, and 5 score means the response has appropriate and correct information.",
            Aspect::Coherence => "Coherence: Coherence is used for evaluating whether the response is relevant and consistent with the dialogue history. 1 score means the response is not suitable or is inconsistent with the dialogue history, 5 score means the response is suitable and consistent with the context.",
            Aspect::Humanness => "Humanness: Humanness is used for evaluating whether the response is similar to the tones of human beings. 1 score means the response is unnatural and the speaker seems not human-like, and 5 score means the response is natural and the speaker seems like a human being.",
        }
    }
}

impl std::str::FromStr for Aspect {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ASPECTS
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| EvalError::UnknownAspect(s.to_string()))
    }
}

pub fn render_geval_prompt(
    aspect: &str,
    history: &str,
    response: &str,
) -> Result<String, EvalError> {
    let aspect: Aspect = aspect.parse()?;
    let name = aspect.name();
    Ok(format!(
        "Task:\n\n\
Please make sure you read and understand the below instructs carefully. You will be provided a dialogue history and a response, you need to evaluate the {name} between them and output a score of 1 to 5. The detailed evaluation criteria are provided below.\n\n\
Evaluation Criteria:\n\n\
{criterion}\n\n\
Evaluation Steps:\n\n\
1. Read the above task definition and the evaluation criteria carefully.\n\n\
2. Read the below given dialogue history and response carefully.\n\n\
3. Assign a score for {name} on a scale of 1 to 5, where 1 is the lowest and 5 is the highest based on the Evaluation Criteria.\n\n\
Dialogue history:\n\n\
{history}\n\n\
Response:\n\n\
{response}\n\n\
Score:\n",
        criterion = aspect.criterion(),
    ))
}

/// First run of ASCII digits whose value is 1..=5. Longer numbers such as
/// `10` are skipped.
pub fn parse_score(completion: &str) -> Result<u8, EvalError> {
    let bytes = completion.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i - start == 1 && (b'1'..=b'5').contains(&bytes[start]) {
                return Ok(bytes[start] - b'0');
            }
        } else {
            i += 1;
        }
    }
    Err(EvalError::Unparseable(
        completion.chars().take(200).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GevalConfig {
    /// Scoring makes network calls and must be switched on explicitly.
    pub enabled: bool,
    /// Full URL of the chat-completion endpoint.
    pub url: String,
    pub model: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    /// Minimum spacing between requests from one client.
    pub min_interval_ms: u64,
    pub timeout_secs: u64,
}

impl Default for GevalConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "gpt-4".into(),
            max_retries: 3,
            initial_backoff_ms: 250,
            max_backoff_ms: 4000,
            min_interval_ms: 500,
            timeout_secs: 60,
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: String,
}

/// Rate-limited chat-completion client.
pub struct GevalClient {
    config: GevalConfig,
    token: Option<String>,
    agent: ureq::Agent,
    last: Mutex<Option<Instant>>,
}

impl GevalClient {
    /// Reads the bearer token from [`TOKEN_ENV`] when set.
    pub fn new(config: GevalConfig) -> Result<Self, EvalError> {
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Self::with_token(config, token)
    }

    pub fn with_token(config: GevalConfig, token: Option<String>) -> Result<Self, EvalError> {
        if !config.enabled {
            return Err(EvalError::Disabled);
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build();
        Ok(Self {
            config,
            token,
            agent,
            last: Mutex::new(None),
        })
    }

    fn wait_turn(&self) {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        let gap = Duration::from_millis(self.config.min_interval_ms);
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < gap {
                thread::sleep(gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn complete_once(&self, prompt: &str) -> Result<String, String> {
        self.wait_turn();
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: 0.0,
        };
        let mut req = self.agent.post(&self.config.url);
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        let resp = req.send_json(&body).map_err(|e| e.to_string())?;
        let parsed: ChatResponse = resp
            .into_json()
            .map_err(|e| format!("bad response body: {e}"))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| "response has no choices".to_string())
    }

    /// Sends the prompt, retrying failed requests with doubling backoff.
    /// A completion without a score is not retried.
    pub fn complete(&self, prompt: &str) -> Result<String, EvalError> {
        let mut backoff = self.config.initial_backoff_ms;
        let mut attempt = 0;
        loop {
            match self.complete_once(prompt) {
                Ok(text) => return Ok(text),
                Err(e) if attempt >= self.config.max_retries => {
                    return Err(EvalError::Network(format!(
                        "{e} (after {} attempts)",
                        attempt + 1
                    )))
                }
                Err(_) => {
                    thread::sleep(Duration::from_millis(backoff));
                    backoff = (backoff.saturating_mul(2)).min(self.config.max_backoff_ms);
                    attempt += 1;
                }
            }
        }
    }

    pub fn score(&self, prompt: &str) -> Result<u8, EvalError> {
        parse_score(&self.complete(prompt)?)
    }
}

/// One-shot scoring with a fresh client.
pub fn geval_score(config: &GevalConfig, prompt: &str) -> Result<u8, EvalError> {
    GevalClient::new(config.clone())?.score(prompt)
}
