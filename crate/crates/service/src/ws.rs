//! Lockstep WebSocket per session: one `{action}` in, one frame out.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::Response;
use serde_json::json;

use crate::api::{abort_session, step_session, ActRequest};
use crate::error::ApiError;
use crate::AppState;

pub async fn upgrade(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    {
        let mut inner = app.lock();
        if !inner.sessions.contains_key(&id) {
            return Err(ApiError::not_found(format!("session {id}")));
        }
        if !inner.attached.insert(id.clone()) {
            return Err(ApiError::conflict("session_attached", format!("session {id} already has a socket")));
        }
    }
    Ok(ws.on_upgrade(move |socket| run(socket, app, id)))
}

fn text(v: impl serde::Serialize) -> Message {
    Message::Text(serde_json::to_string(&v).expect("json").into())
}

async fn run(mut socket: WebSocket, app: Arc<AppState>, id: String) {
    let first = app.lock().sessions.get(&id).map(|s| s.frame());
    if let Some(frame) = first {
        if socket.send(text(frame)).await.is_err() {
            detach(&app, &id);
            return;
        }
    }
    while let Some(Ok(msg)) = socket.recv().await {
        let reply = match msg {
            Message::Text(t) => match serde_json::from_str::<ActRequest>(&t) {
                Ok(req) => match step_session(&app, &id, &req.action) {
                    Ok(frame) => text(frame),
                    Err(e) => text(e.body()),
                },
                Err(e) => text(json!({ "v": 1, "error": "bad_request", "message": e.to_string() })),
            },
            Message::Close(_) => break,
            _ => continue,
        };
        if socket.send(reply).await.is_err() {
            break;
        }
    }
    detach(&app, &id);
}

/// A dropped connection aborts a still-open session.
fn detach(app: &AppState, id: &str) {
    let open = app.lock().sessions.get(id).is_some_and(|s| s.is_open());
    if open {
        let _ = abort_session(app, id);
    }
    app.lock().attached.remove(id);
}
