//! Minimal in-process HTTP server speaking the chat-completions protocol.
//!
//! It validates each request body against the wire schema the HTTP backend
//! is expected to produce and, by default, replies with the number of
//! messages it received. Used by tests and the `http_backend` example.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};

type Responder = dyn Fn(&Value) -> String + Send + Sync;

/// Checks a chat-completions request body. Returns a description of the
/// first violation.
pub fn validate_chat_request(body: &Value) -> Result<(), String> {
    let obj = body.as_object().ok_or("body is not an object")?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "model" | "messages" | "temperature") {
            return Err(format!("unexpected key `{key}`"));
        }
    }
    if !obj.get("model").is_some_and(Value::is_string) {
        return Err("`model` must be a string".into());
    }
    if let Some(t) = obj.get("temperature") {
        if !t.is_number() {
            return Err("`temperature` must be a number".into());
        }
    }
    let messages = obj
        .get("messages")
        .and_then(Value::as_array)
        .ok_or("`messages` must be an array")?;
    if messages.is_empty() {
        return Err("`messages` is empty".into());
    }
    for (i, m) in messages.iter().enumerate() {
        let role = m["role"].as_str().ok_or(format!("messages[{i}].role missing"))?;
        if !matches!(role, "system" | "user" | "assistant") {
            return Err(format!("messages[{i}].role `{role}` invalid"));
        }
        match &m["content"] {
            Value::String(_) => {}
            Value::Array(parts) => {
                if role == "system" {
                    return Err(format!("messages[{i}]: system content must be a string"));
                }
                for (j, p) in parts.iter().enumerate() {
                    match p["type"].as_str() {
                        Some("text") if p["text"].is_string() => {}
                        Some("image_url") => {
                            let url = p["image_url"]["url"].as_str().unwrap_or("");
                            if !url.starts_with("data:image/png;base64,") {
                                return Err(format!("messages[{i}].content[{j}]: image must be a PNG data URL"));
                            }
                        }
                        _ => return Err(format!("messages[{i}].content[{j}]: bad part")),
                    }
                }
            }
            _ => return Err(format!("messages[{i}].content must be a string or array")),
        }
    }
    Ok(())
}

pub struct StubServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    received: Arc<Mutex<Vec<Value>>>,
    fail_first: Arc<AtomicUsize>,
}

impl StubServer {
    /// Starts a server that answers with the request's message count.
    pub fn start() -> std::io::Result<Self> {
        Self::start_with(|body| body["messages"].as_array().map_or(0, Vec::len).to_string())
    }

    pub fn start_with(responder: impl Fn(&Value) -> String + Send + Sync + 'static) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let received = Arc::new(Mutex::new(Vec::new()));
        let fail_first = Arc::new(AtomicUsize::new(0));
        let responder: Arc<Responder> = Arc::new(responder);
        let handle = {
            let shutdown = shutdown.clone();
            let received = received.clone();
            let fail_first = fail_first.clone();
            std::thread::spawn(move || {
                while !shutdown.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let _ = stream.set_nonblocking(false);
                            let _ = serve(stream, &*responder, &received, &fail_first);
                        }
                        Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                            std::thread::sleep(std::time::Duration::from_millis(2));
                        }
                        Err(_) => break,
                    }
                }
            })
        };
        Ok(StubServer { addr, shutdown, handle: Some(handle), received, fail_first })
    }

    /// Base URL to configure the HTTP backend with.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Makes the next `n` requests fail with HTTP 503.
    pub fn fail_next(&self, n: usize) {
        self.fail_first.store(n, Ordering::SeqCst);
    }

    /// Request bodies that passed schema validation, in arrival order.
    pub fn received(&self) -> Vec<Value> {
        self.received.lock().expect("stub lock").clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(
    stream: TcpStream,
    responder: &Responder,
    received: &Mutex<Vec<Value>>,
    fail_first: &AtomicUsize,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let (status, payload) = if fail_first
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        (503, json!({"error": {"message": "temporarily unavailable"}}))
    } else if !request_line.starts_with("POST ") || !request_line.contains("/chat/completions") {
        (404, json!({"error": {"message": format!("no route for {}", request_line.trim())}}))
    } else {
        match serde_json::from_slice::<Value>(&body)
            .map_err(|e| e.to_string())
            .and_then(|v| validate_chat_request(&v).map(|()| v))
        {
            Ok(v) => {
                let content = responder(&v);
                received.lock().expect("stub lock").push(v);
                (
                    200,
                    json!({
                        "id": "stub",
                        "object": "chat.completion",
                        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
                    }),
                )
            }
            Err(e) => (400, json!({"error": {"message": e}})),
        }
    };
    let body = payload.to_string();
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        _ => "Service Unavailable",
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_accepts_and_rejects() {
        let ok = json!({"model": "m", "messages": [{"role": "system", "content": "s"},
            {"role": "user", "content": [{"type": "text", "text": "q"},
              {"type": "image_url", "image_url": {"url": "data:image/png;base64,AA=="}}]}]});
        assert!(validate_chat_request(&ok).is_ok());
        assert!(validate_chat_request(&json!({"model": "m", "messages": []})).is_err());
        assert!(validate_chat_request(&json!({"model": "m", "messages": [{"role": "tool", "content": "x"}]})).is_err());
        assert!(validate_chat_request(&json!({"model": "m", "stream": true, "messages": [{"role": "user", "content": "x"}]})).is_err());
        let bad_img = json!({"model": "m", "messages": [{"role": "user", "content": [
            {"type": "image_url", "image_url": {"url": "http://x/y.png"}}]}]});
        assert!(validate_chat_request(&bad_img).is_err());
    }
}
