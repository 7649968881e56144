//! Startup handshake for the TCP backend.
//!
//! Every unit connects to the rendezvous socket (normally served by the
//! launcher) and sends a `CTRL` frame carrying its unit id and the address its
//! service listener is bound to. Once all units have reported, the server
//! answers each of them with the full address table, one address per line in
//! unit order.

use std::io::{self, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

use super::frame::{Frame, Opcode};

/// Tag carried in the `offset` field of handshake frames.
pub const HELLO_TAG: u64 = u64::MAX;

pub struct RendezvousServer {
    listener: TcpListener,
}

impl RendezvousServer {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<RendezvousServer> {
        Ok(RendezvousServer {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Runs one handshake for `n_units` units.
    pub fn serve(&self, n_units: usize, timeout: Duration) -> Result<()> {
        let deadline = Instant::now() + timeout;
        self.listener.set_nonblocking(true)?;
        let mut table: Vec<Option<String>> = vec![None; n_units];
        let mut streams = Vec::with_capacity(n_units);
        while streams.len() < n_units {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    stream.set_read_timeout(Some(remaining(deadline)?))?;
                    let hello = Frame::read_from(&mut BufReader::new(&stream))?.ok_or_else(|| {
                        Error::Startup("unit closed the rendezvous connection early".into())
                    })?;
                    if hello.opcode != Opcode::Ctrl || hello.offset != HELLO_TAG {
                        return Err(Error::Startup("malformed rendezvous hello".into()));
                    }
                    let unit = hello.unit as usize;
                    if unit >= n_units {
                        return Err(Error::Startup(format!(
                            "unit id {unit} out of range for {n_units} units"
                        )));
                    }
                    if table[unit].is_some() {
                        return Err(Error::Startup(format!("unit id {unit} registered twice")));
                    }
                    let addr = String::from_utf8(hello.payload)
                        .map_err(|_| Error::Startup("non-UTF-8 address".into()))?;
                    table[unit] = Some(addr);
                    streams.push(stream);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(Error::Startup(format!(
                            "only {} of {n_units} units reached the rendezvous",
                            streams.len()
                        )));
                    }
                    thread::sleep(Duration::from_millis(2));
                }
                Err(e) => return Err(e.into()),
            }
        }
        let joined = table
            .into_iter()
            .map(|a| a.expect("all slots filled"))
            .collect::<Vec<_>>()
            .join("\n");
        for stream in streams {
            let mut w = BufWriter::new(stream);
            Frame::with_payload(Opcode::Ctrl, 0, u32::MAX, HELLO_TAG, joined.clone().into_bytes())
                .write_to(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }
}

fn remaining(deadline: Instant) -> Result<Duration> {
    deadline
        .checked_duration_since(Instant::now())
        .filter(|d| !d.is_zero())
        .ok_or_else(|| Error::Startup("rendezvous timed out".into()))
}

/// Connects to `addr`, retrying until `deadline`.
pub fn connect_with_retry(addr: &str, deadline: Instant) -> Result<TcpStream> {
    let mut last_err = None;
    loop {
        let addrs: Vec<SocketAddr> = match addr.to_socket_addrs() {
            Ok(a) => a.collect(),
            Err(e) => return Err(Error::Startup(format!("cannot resolve {addr}: {e}"))),
        };
        for a in &addrs {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                break;
            }
            match TcpStream::connect_timeout(a, left.min(Duration::from_secs(1))) {
                Ok(s) => {
                    s.set_nodelay(true)?;
                    return Ok(s);
                }
                Err(e) => last_err = Some(e),
            }
        }
        if Instant::now() >= deadline {
            return Err(Error::Startup(format!(
                "cannot reach {addr}: {}",
                last_err.map(|e| e.to_string()).unwrap_or_else(|| "timed out".into())
            )));
        }
        thread::sleep(Duration::from_millis(10));
    }
}

/// Client half of the handshake. Returns the service address of every unit.
pub fn exchange(
    rendezvous: &str,
    unit: u32,
    n_units: usize,
    listen_addr: SocketAddr,
    deadline: Instant,
) -> Result<Vec<SocketAddr>> {
    let stream = connect_with_retry(rendezvous, deadline)?;
    exchange_on(stream, unit, n_units, listen_addr, deadline)
}

/// [`exchange`] over an already connected stream.
pub fn exchange_on(
    stream: TcpStream,
    unit: u32,
    n_units: usize,
    listen_addr: SocketAddr,
    deadline: Instant,
) -> Result<Vec<SocketAddr>> {
    let mut w = BufWriter::new(&stream);
    Frame::with_payload(Opcode::Ctrl, 0, unit, HELLO_TAG, listen_addr.to_string().into_bytes())
        .write_to(&mut w)?;
    w.flush()?;
    drop(w);
    stream.set_read_timeout(Some(remaining(deadline)?))?;
    let reply = Frame::read_from(&mut BufReader::new(&stream))
        .map_err(|e| Error::Startup(format!("rendezvous reply: {e}")))?
        .ok_or_else(|| Error::Startup("rendezvous closed without a table".into()))?;
    let text = String::from_utf8(reply.payload).map_err(|_| Error::Startup("bad table".into()))?;
    let table = text
        .lines()
        .map(|l| {
            l.parse::<SocketAddr>()
                .map_err(|e| Error::Startup(format!("bad address {l:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if table.len() != n_units {
        return Err(Error::Startup(format!(
            "address table has {} entries, expected {n_units}",
            table.len()
        )));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handshake_distributes_table() {
        let server = RendezvousServer::bind("127.0.0.1:0").unwrap();
        let addr = server.local_addr().unwrap().to_string();
        let h = thread::spawn(move || server.serve(3, Duration::from_secs(5)));
        let clients: Vec<_> = (0..3u32)
            .map(|u| {
                let addr = addr.clone();
                thread::spawn(move || {
                    let mine: SocketAddr = format!("127.0.0.1:{}", 5000 + u).parse().unwrap();
                    exchange(&addr, u, 3, mine, Instant::now() + Duration::from_secs(5)).unwrap()
                })
            })
            .collect();
        for c in clients {
            let table = c.join().unwrap();
            assert_eq!(table[2].port(), 5002);
        }
        h.join().unwrap().unwrap();
    }

    #[test]
    fn unreachable_rendezvous_is_a_startup_failure() {
        // Bind then drop to obtain a port nobody listens on.
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let err = exchange(
            &format!("127.0.0.1:{port}"),
            0,
            2,
            "127.0.0.1:1".parse().unwrap(),
            Instant::now() + Duration::from_millis(200),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Startup(_)), "{err}");
    }

    #[test]
    fn duplicate_unit_id_rejected() {
        let server = RendezvousServer::bind("127.0.0.1:0").unwrap();
        let addr = server.local_addr().unwrap().to_string();
        let h = thread::spawn(move || server.serve(2, Duration::from_secs(5)));
        for _ in 0..2 {
            let addr = addr.clone();
            thread::spawn(move || {
                let _ = exchange(&addr, 0, 2, "127.0.0.1:1".parse().unwrap(), Instant::now() + Duration::from_secs(2));
            });
        }
        assert!(matches!(h.join().unwrap(), Err(Error::Startup(_))));
    }
}
