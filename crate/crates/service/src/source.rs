//! Tick producers. Each runs on its own thread and feeds a bounded channel;
//! it stops when the channel's receiver is dropped or its input ends.

use std::io::Read;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use cogload::ingest::{decode_payload, FrameParser, TickAssembler};
use cogload::synth::{cohort_stream, ClassProfiles, SyntheticCohort};
use cogload::{SampleRecord, Task};

pub const CHANNEL_CAPACITY: usize = 64;
pub const DEVICE_RATE: Duration = Duration::from_secs(1);

pub struct TickSource {
    pub ticks: Receiver<SampleRecord>,
    pub handle: JoinHandle<()>,
}

fn spawn(name: &str, body: impl FnOnce(SyncSender<SampleRecord>) + Send + 'static) -> TickSource {
    let (tx, rx) = sync_channel(CHANNEL_CAPACITY);
    let handle = std::thread::Builder::new()
        .name(name.to_string())
        .spawn(move || body(tx))
        .expect("spawn source thread");
    TickSource { ticks: rx, handle }
}

/// Send records, one per `pace` when given, measured from the first send
/// so that sleeps do not accumulate drift.
fn paced_send(tx: &SyncSender<SampleRecord>, records: impl Iterator<Item = SampleRecord>, pace: Option<Duration>) {
    let start = Instant::now();
    for (i, r) in records.enumerate() {
        if let Some(p) = pace {
            let due = start + p * i as u32;
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        if tx.send(r).is_err() {
            return;
        }
    }
}

/// One synthetic participant following the cohort's plan.
pub fn synthetic(cohort: SyntheticCohort, profiles: ClassProfiles, pace: Option<Duration>) -> TickSource {
    spawn("synthetic-source", move |tx| {
        let one = SyntheticCohort {
            n_participants: 1,
            ..cohort
        };
        paced_send(&tx, cohort_stream(&one, &profiles), pace);
    })
}

/// Previously logged records, in order.
pub fn replay(records: Vec<SampleRecord>, pace: Option<Duration>) -> TickSource {
    spawn("replay-source", move |tx| paced_send(&tx, records.into_iter(), pace))
}

/// Framed device bytes, e.g. a serial port or a capture file. The device
/// sets the pace; frames that fail their checksum or payload decoding are
/// skipped.
pub fn device<R: Read + Send + 'static>(mut input: R) -> TickSource {
    spawn("device-source", move |tx| {
        let mut parser = FrameParser::new();
        let mut asm = TickAssembler::new("device", 1, Task::Unlabeled);
        let mut chunk = [0u8; 512];
        loop {
            let n = match input.read(&mut chunk) {
                Ok(0) | Err(_) => return,
                Ok(n) => n,
            };
            parser.push(&chunk[..n]);
            while let Some(frame) = parser.next_frame() {
                let Ok(update) = decode_payload(&frame) else { continue };
                if let Some(record) = asm.apply(&update) {
                    if tx.send(record).is_err() {
                        return;
                    }
                }
            }
        }
    })
}
