//! Service stage: websocket endpoint for the performer UI.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::time::Duration;

use crossbeam_channel::Sender;
use tungstenite::{Message, WebSocket};

use super::protocol::{parse_control, ControlMessage, ServerMessage, Status};
use super::{AudioControl, FrameUpdate, SessionError, VisionControl};
use crate::synth::{load_sample, SynthConfig};

/// Initial status mirror for a session.
pub fn initial_status(synth: &SynthConfig, midi_enabled: bool, threshold: f32) -> Status {
    Status {
        midi_enabled,
        muted: synth.muted,
        fps: 0.0,
        volumes: synth.strips.map(|s| [s.vol_l, s.vol_r]),
        delay: synth.delay,
        adsr: synth.adsr,
        samples: std::array::from_fn(|g| match &synth.samples[g] {
            Some(p) => p.display().to_string(),
            None => "builtin".to_owned(),
        }),
        threshold,
    }
}

pub struct Service {
    listener: TcpListener,
    clients: Vec<WebSocket<TcpStream>>,
    status: Status,
    sample_rate: u32,
    vision: Sender<VisionControl>,
    audio: Sender<AudioControl>,
}

impl Service {
    pub fn bind(
        port: u16,
        status: Status,
        sample_rate: u32,
        vision: Sender<VisionControl>,
        audio: Sender<AudioControl>,
    ) -> Result<Self, SessionError> {
        let listener = TcpListener::bind(("0.0.0.0", port)).map_err(|e| SessionError::Bind { port, source: e })?;
        listener.set_nonblocking(true).map_err(|e| SessionError::Bind { port, source: e })?;
        Ok(Self { listener, clients: Vec::new(), status, sample_rate, vision, audio })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn client_count(&self) -> usize {
        self.clients.len()
    }

    /// Applies one client message and returns the replies for that client.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        match parse_control(text).and_then(|msg| self.apply(msg)) {
            Ok(name) => vec![ServerMessage::Ack { control: name.into() }, ServerMessage::Status(self.status.clone())],
            Err(e) => vec![ServerMessage::Error { message: e.to_string() }],
        }
    }

    fn apply(&mut self, msg: ControlMessage) -> Result<&'static str, SessionError> {
        let name = msg.name();
        let closed = || SessionError::Stage("pipeline stage has stopped".into());
        match msg {
            ControlMessage::ToggleMidi => {
                self.status.midi_enabled = !self.status.midi_enabled;
                self.vision.send(VisionControl::SetMidi(self.status.midi_enabled)).map_err(|_| closed())?;
            }
            ControlMessage::SetThreshold { value } => {
                self.status.threshold = value;
                self.vision.send(VisionControl::SetThreshold(value)).map_err(|_| closed())?;
            }
            ControlMessage::Mute { muted } => {
                self.status.muted = muted.unwrap_or(!self.status.muted);
                self.audio.send(AudioControl::Mute(self.status.muted)).map_err(|_| closed())?;
            }
            ControlMessage::SetVolume { channel, l, r } => {
                self.status.volumes[usize::from(channel - 1)] = [l, r];
                self.audio.send(AudioControl::Volume { channel, l, r }).map_err(|_| closed())?;
            }
            ControlMessage::SetDelay(p) => {
                self.status.delay = p;
                self.audio.send(AudioControl::Delay(p)).map_err(|_| closed())?;
            }
            ControlMessage::SetAdsr(p) => {
                self.status.adsr = p;
                self.audio.send(AudioControl::Adsr(p)).map_err(|_| closed())?;
            }
            ControlMessage::LoadSample { group, path } => {
                // decoded here so the audio stage only swaps a pointer
                let sample = load_sample(&path, group, self.sample_rate).map_err(|e| SessionError::Validation(e.to_string()))?;
                self.status.samples[group.index()] = sample.source.clone();
                self.audio.send(AudioControl::Sample(sample)).map_err(|_| closed())?;
            }
        }
        Ok(name)
    }

    fn accept(&mut self) {
        loop {
            match self.listener.accept() {
                Ok((stream, addr)) => match handshake(stream) {
                    Ok(mut ws) => {
                        log::info!("ui client connected from {addr}");
                        let hello = ServerMessage::Status(self.status.clone()).to_text();
                        if send(&mut ws, hello) {
                            self.clients.push(ws);
                        }
                    }
                    Err(e) => log::warn!("websocket handshake with {addr} failed: {e}"),
                },
                Err(e) if e.kind() == ErrorKind::WouldBlock => break,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    break;
                }
            }
        }
    }

    /// One service iteration: accept clients, answer their messages, and
    /// broadcast `frame` if given.
    pub fn poll(&mut self, frame: Option<FrameUpdate>) {
        self.accept();
        let mut i = 0;
        while i < self.clients.len() {
            let mut alive = true;
            loop {
                match self.clients[i].read() {
                    Ok(Message::Text(text)) => {
                        for reply in self.handle_text(&text) {
                            alive &= send(&mut self.clients[i], reply.to_text());
                        }
                    }
                    Ok(Message::Close(_)) => {
                        alive = false;
                        break;
                    }
                    Ok(Message::Binary(_)) => {
                        let msg = ServerMessage::Error { message: "binary messages are not supported".into() };
                        alive &= send(&mut self.clients[i], msg.to_text());
                    }
                    Ok(_) => {}
                    Err(tungstenite::Error::Io(e)) if e.kind() == ErrorKind::WouldBlock => break,
                    Err(_) => {
                        alive = false;
                        break;
                    }
                }
            }
            if alive {
                i += 1;
            } else {
                self.clients.swap_remove(i);
            }
        }

        if let Some(update) = frame {
            self.status.fps = update.fps;
            let text = ServerMessage::frame(&update.frame, update.overlay, self.status.clone()).to_text();
            self.clients.retain_mut(|ws| send(ws, text.clone()));
        }
    }
}

fn handshake(stream: TcpStream) -> Result<WebSocket<TcpStream>, String> {
    stream.set_nonblocking(false).map_err(|e| e.to_string())?;
    stream.set_read_timeout(Some(Duration::from_secs(2))).map_err(|e| e.to_string())?;
    // a slow client loses frames instead of growing an unbounded backlog
    let config = tungstenite::protocol::WebSocketConfig { max_write_buffer_size: 2 << 20, ..Default::default() };
    let ws = tungstenite::accept_with_config(stream, Some(config)).map_err(|e| e.to_string())?;
    ws.get_ref().set_read_timeout(None).map_err(|e| e.to_string())?;
    ws.get_ref().set_nonblocking(true).map_err(|e| e.to_string())?;
    Ok(ws)
}

/// Queues and flushes one message; false when the client is gone. A client
/// that cannot keep up simply has frames buffered or dropped by the socket
/// layer; only hard errors disconnect it.
fn send(ws: &mut WebSocket<TcpStream>, text: String) -> bool {
    match ws.send(Message::text(text)) {
        Ok(()) => true,
        Err(tungstenite::Error::Io(e)) if e.kind() == ErrorKind::WouldBlock => true,
        Err(tungstenite::Error::WriteBufferFull(_)) => true,
        Err(e) => {
            log::info!("dropping ui client: {e}");
            false
        }
    }
}
