//! Round-based secure clustering: head election, trusted-head selection,
//! slotted data transfer with overhearing, and per-round trust bookkeeping.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::TrustCloud;
use crate::inference::{EvidenceWindow, ForwardingEvent, It2Fls, TrustEstimator};
use crate::medium::{
    aggregate_energy, channel_ok, monitor_energy, overhear_energy, rx_energy, tx_energy,
    ChannelPhase, EnergyParams,
};
use crate::runtime::{
    accumulate_and_maybe_update, classify, recommend_trust, ClassifyParams, TrustStore,
    UpdateAccumulators, Verdict,
};
use crate::training::StandardClouds;

pub type DeviceId = usize;


#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerProfile {
    Honest,
    Generic,
    Advanced,
    Super,
}

impl AttackerProfile {
    /// Multiplier applied to the base drop/delay probabilities.
    pub fn multiplier(self) -> f64 {
        match self {
            AttackerProfile::Honest => 0.0,
            AttackerProfile::Generic => 2.0,
            AttackerProfile::Advanced => 4.0,
            AttackerProfile::Super => 6.0,
        }
    }

    pub fn is_malicious(self) -> bool {
        self != AttackerProfile::Honest
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackerProfile::Honest => "honest",
            AttackerProfile::Generic => "generic",
            AttackerProfile::Advanced => "advanced",
            AttackerProfile::Super => "super",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Head,
    Member(DeviceId),
    /// Sends its own data straight to the sink this round.
    Unclustered,
}

/// How devices turn individual clouds into verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[default]
    Cloud,
    /// Ground-truth passthrough, for harness self-tests.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub id: DeviceId,
    pub x: f64,
    pub y: f64,
    pub energy: f64,
    pub alive: bool,
    pub role: Role,
    pub last_head: Option<usize>,
    pub profile: AttackerProfile,
    pub trust: TrustStore<f64>,
    /// Latest verdict per target, refreshed whenever the target is classified.
    pub verdicts: BTreeMap<DeviceId, Verdict>,
    /// Latest forwarding events observed per head, oldest first.
    pub evidence: BTreeMap<DeviceId, VecDeque<ForwardingEvent>>,
    pub standard: Option<StandardClouds<f64>>,
    pub accumulators: UpdateAccumulators<f64>,
    pub death_round: Option<usize>,
}

impl DeviceState {
    pub fn new(id: DeviceId, x: f64, y: f64, energy: f64, profile: AttackerProfile, thr_drp: usize, max_drp: usize) -> Self {
        Self {
            id,
            x,
            y,
            energy,
            alive: energy > 0.0,
            role: Role::Unclustered,
            last_head: None,
            profile,
            trust: TrustStore::new(thr_drp),
            verdicts: BTreeMap::new(),
            evidence: BTreeMap::new(),
            standard: None,
            accumulators: UpdateAccumulators::new(max_drp),
            death_round: None,
        }
    }

    /// Appends `event` to the evidence on `head`, keeping the latest
    /// `window` events, and returns the tallies over them.
    pub fn observe(&mut self, head: DeviceId, event: ForwardingEvent, window: usize) -> EvidenceWindow {
        let hist = self.evidence.entry(head).or_default();
        hist.push_back(event);
        while hist.len() > window.max(1) {
            hist.pop_front();
        }
        hist.iter().fold(EvidenceWindow::default(), |w, &e| w.record(e))
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        ((self.x - x).powi(2) + (self.y - y).powi(2)).sqrt()
    }

    pub fn distance(&self, other: &DeviceState) -> f64 {
        self.distance_to(other.x, other.y)
    }

    /// Spends up to `amount` joules; a device hitting zero dies.
    pub fn charge(&mut self, amount: f64, round: usize) {
        if !self.alive || amount <= 0.0 {
            return;
        }
        self.energy -= amount.min(self.energy);
        if self.energy <= 0.0 {
            self.energy = 0.0;
            self.alive = false;
            self.death_round = Some(round);
        }
    }
}

/// Protocol constants a network runs with.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub p_ch: f64,
    pub radius: f64,
    pub data_bits: u64,
    pub control_bits: u64,
    pub monitor_seconds: f64,
    /// Forwarding events per head that each trust value is inferred from.
    pub evidence_window: usize,
    pub energy: EnergyParams<f64>,
    pub p_dp: f64,
    pub p_dy: f64,
    pub classify: ClassifyParams<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub classifier: ClassifierKind,
    pub sink: (f64, f64),
}

/// Head-election threshold `p / (1 - p (r mod 1/p))`, capped at 1.
pub fn election_threshold(round: usize, p_ch: f64) -> f64 {
    let m = (round as f64) % (1.0 / p_ch);
    let denom = 1.0 - p_ch * m;
    if denom <= 0.0 {
        1.0
    } else {
        (p_ch / denom).min(1.0)
    }
}

/// Rounds a device must wait after heading before it may head again.
pub fn eligibility_epoch(p_ch: f64) -> usize {
    (1.0 / p_ch - 1e-9).ceil().max(1.0) as usize
}

pub fn is_eligible(device: &DeviceState, round: usize, p_ch: f64) -> bool {
    device.last_head.is_none_or(|h| round >= h + eligibility_epoch(p_ch))
}

/// Self-election: an eligible, alive device becomes head when a uniform
/// draw falls under the threshold.
pub fn decide_head<R: Rng + ?Sized>(device: &mut DeviceState, round: usize, p_ch: f64, rng: &mut R) -> bool {
    if !device.alive || !is_eligible(device, round, p_ch) {
        return false;
    }
    if rng.random::<f64>() < election_threshold(round, p_ch) {
        device.last_head = Some(round);
        device.role = Role::Head;
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: DeviceId,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinDecision {
    Join(DeviceId),
    BecomeHead,
    DirectToSink,
}

fn nearest<'a, I: Iterator<Item = &'a Candidate>>(it: I) -> Option<&'a Candidate> {
    it.min_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)))
}

/// Picks a head among `candidates`.
///
/// Candidates with an individual cloud are judged by `verdict_of`; the
/// nearest one judged `Normal` wins. Without such a candidate, the
/// candidates lacking a usable verdict are considered: the nearest one never
/// interacted with, or failing that the one with the highest mean trust.
/// With nothing left the member heads its own cluster when eligible and
/// otherwise sends directly to the sink.
pub fn choose_cluster<F>(
    candidates: &[Candidate],
    store: &TrustStore<f64>,
    mut verdict_of: F,
    eligible: bool,
) -> JoinDecision
where
    F: FnMut(DeviceId, &TrustCloud<f64>) -> Option<Verdict>,
{
    let mut trusted = Vec::new();
    let mut unknown = Vec::new();
    for c in candidates {
        match store.cloud(c.id).and_then(|itc| verdict_of(c.id, itc)) {
            Some(Verdict::Normal) => trusted.push(*c),
            Some(Verdict::Malicious) => {}
            None => unknown.push(*c),
        }
    }
    if let Some(c) = nearest(trusted.iter()) {
        return JoinDecision::Join(c.id);
    }
    if let Some(c) = nearest(unknown.iter().filter(|c| !store.interacted(c.id))) {
        return JoinDecision::Join(c.id);
    }
    let best = unknown.iter().max_by(|a, b| {
        store
            .mean(a.id)
            .total_cmp(&store.mean(b.id))
            .then(b.distance.total_cmp(&a.distance))
            .then(b.id.cmp(&a.id))
    });
    if let Some(c) = best {
        return JoinDecision::Join(c.id);
    }
    if eligible {
        JoinDecision::BecomeHead
    } else {
        JoinDecision::DirectToSink
    }
}

/// Ground truth for one member packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PacketFate {
    Timely,
    Delayed,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Drop,
    Delay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub member: DeviceId,
    pub head: DeviceId,
    pub fate: PacketFate,
    /// The head never received the packet, so it needed no forwarding.
    pub lost_in_channel: bool,
    pub attack: Option<AttackKind>,
    /// What the member recorded after overhearing.
    pub observed: ForwardingEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub observer: DeviceId,
    pub target: DeviceId,
    pub verdict: Verdict,
    pub target_malicious: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterRoundOutcome {
    pub clusters: BTreeMap<DeviceId, Vec<DeviceId>>,
    pub unclustered: Vec<DeviceId>,
    pub transfers: Vec<Transfer>,
    pub decisions: Vec<Decision>,
    pub standard_updates: usize,
}

impl ClusterRoundOutcome {
    pub fn attacks(&self) -> (usize, usize) {
        let drops = self.transfers.iter().filter(|t| t.attack == Some(AttackKind::Drop)).count();
        let delays = self.transfers.iter().filter(|t| t.attack == Some(AttackKind::Delay)).count();
        (drops, delays)
    }
}

/// Devices, their fixed neighbourhoods and the protocol constants.
#[derive(Debug, Clone)]
pub struct Network {
    pub devices: Vec<DeviceState>,
    /// Ids within the neighbourhood radius of each device, ascending.
    pub neighbors: Vec<Vec<DeviceId>>,
    pub params: ProtocolParams,
    estimator: It2Fls<f64>,
}

impl Network {
    pub fn new(devices: Vec<DeviceState>, params: ProtocolParams) -> Self {
        let neighbors = devices
            .iter()
            .map(|d| {
                devices
                    .iter()
                    .filter(|o| o.id != d.id && d.distance(o) <= params.radius)
                    .map(|o| o.id)
                    .collect()
            })
            .collect();
        Self { devices, neighbors, params, estimator: It2Fls::default() }
    }

    pub fn alive_count(&self) -> usize {
        self.devices.iter().filter(|d| d.alive).count()
    }

    pub fn estimator(&self) -> &It2Fls<f64> {
        &self.estimator
    }

    fn sink_distance(&self, id: DeviceId) -> f64 {
        let (sx, sy) = self.params.sink;
        self.devices[id].distance_to(sx, sy)
    }

    fn distance(&self, a: DeviceId, b: DeviceId) -> f64 {
        self.devices[a].distance(&self.devices[b])
    }

    /// Charges a broadcast at neighbourhood range plus reception by every
    /// live neighbour.
    fn broadcast(&mut self, from: DeviceId, bits: u64, round: usize) {
        let e = &self.params.energy;
        let tx = tx_energy(bits, self.params.radius, e);
        let rx = rx_energy(bits, e);
        self.devices[from].charge(tx, round);
        for i in 0..self.neighbors[from].len() {
            let n = self.neighbors[from][i];
            self.devices[n].charge(rx, round);
        }
    }

    fn elect(&mut self, round: usize, rng: &mut impl Rng) -> Vec<DeviceId> {
        let p_ch = self.params.p_ch;
        let mut heads = Vec::new();
        for d in self.devices.iter_mut() {
            d.role = Role::Unclustered;
            if decide_head(d, round, p_ch, rng) {
                heads.push(d.id);
            }
        }
        for &h in &heads {
            self.broadcast(h, self.params.control_bits, round);
        }
        heads
    }

    fn form_clusters(&mut self, heads: &[DeviceId], round: usize) -> ClusterRoundOutcome {
        let mut outcome = ClusterRoundOutcome::default();
        let mut is_head = vec![false; self.devices.len()];
        for &h in heads {
            if self.devices[h].alive {
                is_head[h] = true;
                outcome.clusters.insert(h, Vec::new());
            }
        }
        for id in 0..self.devices.len() {
            if !self.devices[id].alive || is_head[id] {
                continue;
            }
            let candidates: Vec<Candidate> = self.neighbors[id]
                .iter()
                .filter(|&&n| is_head[n] && self.devices[n].alive)
                .map(|&n| Candidate { id: n, distance: self.distance(id, n) })
                .collect();
            let dev = &self.devices[id];
            let eligible = is_eligible(dev, round, self.params.p_ch);
            let decision =
                choose_cluster(&candidates, &dev.trust, |t, _| dev.verdicts.get(&t).copied(), eligible);
            match decision {
                JoinDecision::Join(h) => {
                    self.devices[id].role = Role::Member(h);
                    outcome.clusters.get_mut(&h).expect("candidate is a head").push(id);
                }
                JoinDecision::BecomeHead => {
                    let d = &mut self.devices[id];
                    d.role = Role::Head;
                    d.last_head = Some(round);
                    is_head[id] = true;
                    outcome.clusters.insert(id, Vec::new());
                    self.broadcast(id, self.params.control_bits, round);
                }
                JoinDecision::DirectToSink => {
                    self.devices[id].role = Role::Unclustered;
                    outcome.unclustered.push(id);
                }
            }
        }
        outcome
    }

    /// Slotted transfers member → head → sink with overhearing, energy
    /// accounting and attack execution.
    pub fn run_data_phase(
        &mut self,
        outcome: &mut ClusterRoundOutcome,
        phase: &ChannelPhase,
        round: usize,
        rng: &mut impl Rng,
    ) {
        let bits = self.params.data_bits;
        let e = self.params.energy;
        let clusters: Vec<(DeviceId, Vec<DeviceId>)> =
            outcome.clusters.iter().map(|(h, m)| (*h, m.clone())).collect();
        for (head, members) in clusters {
            let mult = self.devices[head].profile.multiplier();
            let (p_drop, p_delay) = (mult * self.params.p_dp, mult * self.params.p_dy);
            let mut received = 0u64;
            let mut retransmit = false;
            for member in members {
                if !self.devices[member].alive {
                    continue;
                }
                let d = self.distance(member, head);
                self.devices[member].charge(tx_energy(bits, d, &e), round);
                let mut t = Transfer {
                    member,
                    head,
                    fate: PacketFate::Dropped,
                    lost_in_channel: false,
                    attack: None,
                    observed: ForwardingEvent::Dropped,
                };
                if !self.devices[head].alive || !channel_ok(phase, rng) {
                    t.lost_in_channel = true;
                } else {
                    received += 1;
                    self.devices[head].charge(rx_energy(bits, &e), round);
                    if mult > 0.0 && rng.random::<f64>() < p_drop {
                        t.attack = Some(AttackKind::Drop);
                    } else {
                        t.fate = PacketFate::Timely;
                        if mult > 0.0 && rng.random::<f64>() < p_delay {
                            t.attack = Some(AttackKind::Delay);
                            t.fate = PacketFate::Delayed;
                        }
                        if !channel_ok(phase, rng) {
                            // sink acknowledgement lost: forwarded again later
                            retransmit = true;
                            t.fate = PacketFate::Delayed;
                        }
                    }
                }
                if self.devices[member].alive {
                    let m = &mut self.devices[member];
                    m.charge(overhear_energy(bits, &e) + monitor_energy(self.params.monitor_seconds, &e), round);
                    let overheard = m.alive && channel_ok(phase, rng);
                    t.observed = match (t.fate, overheard) {
                        (PacketFate::Timely, true) => ForwardingEvent::ForwardedTimely,
                        (PacketFate::Delayed, true) => ForwardingEvent::ForwardedDelayed,
                        _ => ForwardingEvent::Dropped,
                    };
                }
                outcome.transfers.push(t);
            }
            if self.devices[head].alive {
                let ds = self.sink_distance(head);
                let h = &mut self.devices[head];
                h.charge(aggregate_energy(bits, received + 1, &e), round);
                h.charge(tx_energy(bits, ds, &e), round);
                if retransmit {
                    h.charge(tx_energy(bits, ds, &e), round);
                }
            }
        }
        for &id in &outcome.unclustered {
            let ds = self.sink_distance(id);
            self.devices[id].charge(tx_energy(bits, ds, &e), round);
        }
    }

    /// Direct inference on the head from each member's own packet, then
    /// recommendation requests to that head. Returns the (member, head)
    /// pairs that gained direct evidence this round.
    fn update_trust(&mut self, outcome: &ClusterRoundOutcome, round: usize) -> Vec<(DeviceId, DeviceId)> {
        let mut observed = Vec::new();
        for t in &outcome.transfers {
            // an undelivered packet is the member's own loss, not the head's
            if !self.devices[t.member].alive || t.lost_in_channel {
                continue;
            }
            let m = &mut self.devices[t.member];
            let window = m.observe(t.head, t.observed, self.params.evidence_window);
            let value = self.estimator.estimate(&window.attributes().expect("one packet recorded"));
            m.trust.record_trust(t.head, value);
            m.trust.mark_interacted(t.head);
            observed.push((t.member, t.head));
        }

        let ctl = self.params.control_bits;
        let e = self.params.energy;
        for t in &outcome.transfers {
            let (i, j) = (t.member, t.head);
            if !self.devices[i].alive || !self.devices[j].alive {
                continue;
            }
            let d = self.distance(i, j);
            self.devices[i].charge(tx_energy(ctl, d, &e), round);
            self.devices[j].charge(rx_energy(ctl, &e) + tx_energy(ctl, d, &e), round);
            self.devices[i].charge(rx_energy(ctl, &e), round);
            if !self.devices[i].alive || !self.devices[j].alive {
                continue;
            }
            let recs: Vec<(DeviceId, f64)> = self.neighbors[i]
                .iter()
                .filter(|&&k| k != j)
                .filter_map(|&k| self.devices[j].trust.get(k).map(|r| (k, r.mean)))
                .collect();
            let me = &mut self.devices[i];
            let t_ij = me.trust.mean(j);
            for (k, t_jk) in recs {
                let v = recommend_trust(me.trust.mean(k), t_jk, t_ij);
                me.trust.record_trust(k, v);
            }
        }
        observed
    }

    /// Classifies each head a member just observed and feeds the verdict
    /// into that member's standard-cloud accumulators.
    fn decide(&mut self, observed: &[(DeviceId, DeviceId)], outcome: &mut ClusterRoundOutcome, rng: &mut impl Rng) {
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        let classify_params = self.params.classify;
        let kind = self.params.classifier;
        for &(observer, k) in observed {
            let target_malicious = self.devices[k].profile.is_malicious();
            let dev = &mut self.devices[observer];
            if !dev.alive {
                continue;
            }
            let Some(rec) = dev.trust.get(k) else { continue };
            let Some(itc) = rec.cloud else { continue };
            let latest = rec.latest;
            let verdict = match kind {
                ClassifierKind::Oracle => Some(if target_malicious { Verdict::Malicious } else { Verdict::Normal }),
                ClassifierKind::Cloud => dev
                    .standard
                    .as_ref()
                    .and_then(|std| classify(Some(&itc), std, &classify_params, rng).ok()),
            };
            let Some(verdict) = verdict else {
                dev.verdicts.remove(&k);
                continue;
            };
            dev.verdicts.insert(k, verdict);
            outcome.decisions.push(Decision { observer, target: k, verdict, target_malicious });
            if let Some(std) = dev.standard.as_mut() {
                if let Ok(Some(_)) = accumulate_and_maybe_update(&mut dev.accumulators, verdict, latest, std, alpha, beta) {
                    outcome.standard_updates += 1;
                }
            }
        }
    }

    /// One full round: election, cluster join, data phase, trust inference,
    /// recommendations, cloud rebuilds, classification and standard-cloud
    /// updates.
    pub fn run_round(&mut self, round: usize, phase: &ChannelPhase, rng: &mut impl Rng) -> ClusterRoundOutcome {
        if self.alive_count() == 0 {
            return ClusterRoundOutcome::default();
        }
        let heads = self.elect(round, rng);
        let mut outcome = self.form_clusters(&heads, round);
        self.run_data_phase(&mut outcome, phase, round, rng);
        let observed = self.update_trust(&outcome, round);
        self.decide(&observed, &mut outcome, rng);
        outcome
    }
}
