//! MCP tool server: newline-delimited JSON-RPC 2.0 over standard streams.
//!
//! Every input line yields exactly one response, except notifications,
//! which are logged and dropped. Lines longer than [`MAX_MESSAGE_BYTES`]
//! are skipped while streaming and answered with an invalid-request error,
//! so an oversized message is never held in memory.

mod corpus;
mod schemas;
mod tools;

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::panic::AssertUnwindSafe;

use serde_json::{json, Value};

use crate::error::Error;

pub use corpus::{adversarial_corpus, Payload, CATEGORIES};
pub use schemas::{
    input_schema, tool_listing, MAX_ARRAY_ITEMS, MAX_RESULT_LIMIT, MAX_STRING_BYTES, MAX_TRACE_PAYLOAD_BYTES,
    TOOL_NAMES,
};
pub use tools::{ServerConfig, ALLOWED_ROOTS_ENV};

pub const MAX_MESSAGE_BYTES: usize = 4 * 1024 * 1024;
pub const PROTOCOL_VERSION: &str = "2024-11-05";

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;
/// Tool-domain failure; `data.kind` carries the specific error.
pub const TOOL_ERROR: i64 = -32000;

#[derive(Debug, Clone, PartialEq)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    pub data: Option<Value>,
}

impl RpcError {
    fn new(code: i64, message: impl Into<String>) -> Self {
        RpcError {
            code,
            message: message.into(),
            data: None,
        }
    }

    fn with_data(mut self, data: Value) -> Self {
        self.data = Some(data);
        self
    }
}

impl From<Error> for RpcError {
    fn from(e: Error) -> Self {
        let suggestions = match &e {
            Error::NotFound { suggestions, .. } => suggestions.clone(),
            Error::SchemaMismatch { .. } => vec!["call index_repository to rebuild the graph".to_string()],
            _ => Vec::new(),
        };
        let code = match e {
            Error::Validation(_) => INVALID_PARAMS,
            _ => TOOL_ERROR,
        };
        RpcError::new(code, e.to_string()).with_data(json!({"kind": e.kind(), "suggestions": suggestions}))
    }
}

fn error_response(id: Value, e: RpcError) -> Value {
    let mut err = json!({"code": e.code, "message": e.message});
    if let Some(d) = e.data {
        err["data"] = d;
    }
    json!({"jsonrpc": "2.0", "id": id, "error": err})
}

fn ok_response(id: Value, result: Value) -> Value {
    json!({"jsonrpc": "2.0", "id": id, "result": result})
}

pub struct Server {
    tools: tools::Tools,
    validators: HashMap<&'static str, jsonschema::Validator>,
}

impl Server {
    pub fn new(config: ServerConfig) -> Server {
        let validators = TOOL_NAMES
            .iter()
            .map(|&name| {
                let schema = input_schema(name).expect("schema");
                (name, jsonschema::validator_for(&schema).expect("tool schemas are valid"))
            })
            .collect();
        Server {
            tools: tools::Tools::new(config),
            validators,
        }
    }

    pub fn config(&self) -> &ServerConfig {
        self.tools.config()
    }

    /// Handles one raw input line. Returns `None` for notifications.
    pub fn handle_bytes(&mut self, line: &[u8]) -> Option<Value> {
        match std::str::from_utf8(line) {
            Ok(text) => self.handle_message(text),
            Err(_) => Some(error_response(Value::Null, RpcError::new(PARSE_ERROR, "message is not valid UTF-8"))),
        }
    }

    /// Handles one decoded message. Returns `None` for notifications and
    /// blank lines.
    pub fn handle_message(&mut self, text: &str) -> Option<Value> {
        if text.trim().is_empty() {
            tracing::debug!("blank line discarded");
            return None;
        }
        if text.len() > MAX_MESSAGE_BYTES {
            return Some(error_response(Value::Null, oversized()));
        }
        let msg: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return Some(error_response(Value::Null, RpcError::new(PARSE_ERROR, format!("parse error: {e}")))),
        };
        let Value::Object(obj) = &msg else {
            let why = if msg.is_array() { "batch requests are not supported" } else { "request must be an object" };
            return Some(error_response(Value::Null, RpcError::new(INVALID_REQUEST, why)));
        };
        let id = match obj.get("id") {
            None => None,
            Some(v @ (Value::Number(_) | Value::String(_) | Value::Null)) => Some(v.clone()),
            Some(_) => {
                return Some(error_response(
                    Value::Null,
                    RpcError::new(INVALID_REQUEST, "id must be a number, string or null"),
                ))
            }
        };
        let reply_id = id.clone().unwrap_or(Value::Null);
        if obj.get("jsonrpc").and_then(Value::as_str) != Some("2.0") {
            return id.map(|_| error_response(reply_id, RpcError::new(INVALID_REQUEST, "jsonrpc must be \"2.0\"")));
        }
        let Some(method) = obj.get("method").and_then(Value::as_str) else {
            return Some(error_response(reply_id, RpcError::new(INVALID_REQUEST, "method must be a string")));
        };
        let params = obj.get("params").cloned().unwrap_or(Value::Null);
        let Some(id) = id else {
            tracing::debug!("notification {method:?} discarded");
            return None;
        };
        // A bug in one tool must not take the server down.
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| self.dispatch(method, params)))
            .unwrap_or_else(|_| Err(RpcError::new(INTERNAL_ERROR, "internal error")));
        Some(match outcome {
            Ok(result) => ok_response(id, result),
            Err(e) => error_response(id, e),
        })
    }

    fn dispatch(&mut self, method: &str, params: Value) -> Result<Value, RpcError> {
        match method {
            "initialize" => Ok(json!({
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": {"tools": {"listChanged": false}},
                "serverInfo": {"name": "codegraph", "version": env!("CARGO_PKG_VERSION")},
            })),
            "ping" => Ok(json!({})),
            "tools/list" => Ok(json!({"tools": tool_listing()})),
            "tools/call" => self.call_tool(params),
            _ => Err(RpcError::new(METHOD_NOT_FOUND, format!("unknown method {method:?}"))),
        }
    }

    fn call_tool(&mut self, params: Value) -> Result<Value, RpcError> {
        let Value::Object(mut params) = params else {
            return Err(RpcError::new(INVALID_PARAMS, "params must be an object"));
        };
        let Some(Value::String(name)) = params.remove("name") else {
            return Err(RpcError::new(INVALID_PARAMS, "params.name must be a string"));
        };
        let args = match params.remove("arguments") {
            None | Some(Value::Null) => json!({}),
            Some(v @ Value::Object(_)) => v,
            Some(_) => {
                return Err(RpcError::new(INVALID_PARAMS, "arguments must be an object")
                    .with_data(json!({"path": "/arguments"})))
            }
        };
        let Some(validator) = self.validators.get(name.as_str()) else {
            let short: String = name.chars().take(64).collect();
            return Err(RpcError::new(METHOD_NOT_FOUND, format!("unknown tool {short:?}"))
                .with_data(json!({"tools": TOOL_NAMES})));
        };
        if let Some(err) = validator.iter_errors(&args).next() {
            let path = err.instance_path().to_string();
            let message: String = err.to_string().chars().take(200).collect();
            return Err(RpcError::new(INVALID_PARAMS, format!("invalid arguments at {path:?}: {message}"))
                .with_data(json!({"path": path})));
        }
        let value = self.tools.call(&name, &args)?;
        let text = serde_json::to_string(&value).map_err(|e| RpcError::new(INTERNAL_ERROR, e.to_string()))?;
        Ok(json!({
            "content": [{"type": "text", "text": text}],
            "structuredContent": value,
            "isError": false,
        }))
    }

    /// Serves until `input` is exhausted. Each response is written as one
    /// line and flushed.
    pub fn serve<R: BufRead, W: Write>(&mut self, mut input: R, mut output: W) -> std::io::Result<()> {
        let mut line: Vec<u8> = Vec::new();
        let mut overflow = false;
        loop {
            let buf = input.fill_buf()?;
            if buf.is_empty() {
                break;
            }
            let (chunk, consumed, done) = match buf.iter().position(|&b| b == b'\n') {
                Some(i) => (&buf[..i], i + 1, true),
                None => (buf, buf.len(), false),
            };
            if !overflow {
                if line.len() + chunk.len() > MAX_MESSAGE_BYTES {
                    overflow = true;
                    line = Vec::new();
                } else {
                    line.extend_from_slice(chunk);
                }
            }
            input.consume(consumed);
            if done {
                self.finish_line(&mut line, &mut overflow, &mut output)?;
            }
        }
        if overflow || !line.is_empty() {
            self.finish_line(&mut line, &mut overflow, &mut output)?;
        }
        Ok(())
    }

    fn finish_line<W: Write>(&mut self, line: &mut Vec<u8>, overflow: &mut bool, output: &mut W) -> std::io::Result<()> {
        let reply = if *overflow {
            tracing::warn!("message over {MAX_MESSAGE_BYTES} bytes rejected");
            Some(error_response(Value::Null, oversized()))
        } else {
            if line.last() == Some(&b'\r') {
                line.pop();
            }
            self.handle_bytes(line)
        };
        line.clear();
        *overflow = false;
        if let Some(reply) = reply {
            serde_json::to_writer(&mut *output, &reply)?;
            output.write_all(b"\n")?;
            output.flush()?;
        }
        Ok(())
    }

    /// Keeps the default repository's graph in sync from now on. Returns
    /// false when it has not been indexed yet.
    pub fn start_watch(&mut self) -> crate::Result<bool> {
        self.tools.start_watch()
    }

    /// Stops background watchers and waits for running index jobs.
    pub fn shutdown(&mut self) {
        self.tools.shutdown();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn oversized() -> RpcError {
    RpcError::new(INVALID_REQUEST, format!("message exceeds {MAX_MESSAGE_BYTES} bytes"))
        .with_data(json!({"kind": "oversized"}))
}

/// Serves on the process's standard streams.
pub fn serve_stdio(mut server: Server) -> std::io::Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let result = server.serve(stdin.lock(), stdout.lock());
    server.shutdown();
    result
}
