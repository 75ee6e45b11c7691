use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use super::center::{make_decoys, verify_decoys};
use super::client::{
    alice_forward, choose_pairs, interleave, pad_angles, sample_ordered, shuffle, Forwarded,
    PairingRecord,
};
use super::message::Message;
use super::network::{ChannelPolicy, Network};
use super::server::Server;
use super::world::{QubitId, World, WorldEvent};
use super::{
    AbortReason, DecoyVerdict, ForwardOrder, Halt, Inspection, PaddingStrategy, PartyId,
    ProtocolError, ProtocolResult, RunConfig, RunOutcome, Strategy, Variant,
};
use crate::enumerate::{for_each_path, EnumerateError, ExhaustiveTape};
use crate::mbqc::{adapted_angle, delta_angle, output_byproduct, Computation};
use crate::qsim::checks::{blind_measurement_identity, residual_identity};
use crate::qsim::{bell_state, equal_up_to_phase, plus_state, Angle, BasisSign, BellLabel};
use crate::sampling::{BranchSampler, RngSampler};
use crate::seed::SeedTree;
use crate::stats::{bits_to_string, Distribution};

use PartyId::*;

/// Attempts made by [`run_with_retries`] before giving up.
pub const MAX_ATTEMPTS: usize = 16;

const STATE_TOL: f64 = 1e-9;

fn sign_ok(
    sign: BasisSign,
    check: fn(BasisSign) -> bool,
    cache: &'static [OnceLock<bool>; 2],
) -> bool {
    let i = usize::from(sign == BasisSign::Minus);
    *cache[i].get_or_init(|| check(sign))
}

/// Rejects sign conventions under which the protocol identities fail.
fn validate_signs(cfg: &RunConfig) -> Result<(), ProtocolError> {
    static FRAME: [OnceLock<bool>; 2] = [OnceLock::new(), OnceLock::new()];
    static BFK: [OnceLock<bool>; 2] = [OnceLock::new(), OnceLock::new()];
    let frame = |s| residual_identity(s).map(|o| o.passed()).unwrap_or(false);
    let bfk = |s| {
        blind_measurement_identity(s)
            .map(|o| o.passed())
            .unwrap_or(false)
    };
    if !sign_ok(cfg.signs.bfk, bfk, &BFK) {
        return Err(ProtocolError::SignConvention {
            role: "blind pattern",
            sign: cfg.signs.bfk,
        });
    }
    if cfg.variant != Variant::Bfk && !sign_ok(cfg.signs.frame, frame, &FRAME) {
        return Err(ProtocolError::SignConvention {
            role: "remote preparation",
            sign: cfg.signs.frame,
        });
    }
    Ok(())
}

/// Where each particle of the forwarded stream came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// Original index in the `2n` client-side particles.
    Real(usize),
    /// Decoy pair and which of its two particles.
    Decoy(usize, u8),
}

#[derive(Debug, Clone, Copy)]
enum Request {
    Pair(usize),
    Decoy(usize),
}

struct Session<'a> {
    cfg: &'a RunConfig,
    comp: &'a Computation,
    world: World<'a>,
    net: Network,
    alice: RngSampler<ChaCha8Rng>,
    center: RngSampler<ChaCha8Rng>,
    servers: BTreeMap<PartyId, Server<'static>>,
    inspection: Inspection,
}

impl<'a> Session<'a> {
    fn new(
        cfg: &'a RunConfig,
        comp: &'a Computation,
        seeds: SeedTree,
        nature: Box<dyn BranchSampler + 'a>,
    ) -> Self {
        let servers = cfg
            .variant
            .servers()
            .map(|id| {
                let rng = RngSampler(seeds.child("server").child(&id.to_string()).rng());
                (id, Server::new(id, cfg.strategy_of(id), Box::new(rng)))
            })
            .collect();
        Self {
            cfg,
            comp,
            world: World::new(nature),
            net: Network::new(ChannelPolicy::for_variant(cfg.variant)),
            alice: RngSampler(seeds.child("alice").rng()),
            center: RngSampler(seeds.child("center").rng()),
            servers,
            inspection: Inspection::default(),
        }
    }

    fn m(&self) -> usize {
        self.comp.graph().num_vertices()
    }

    fn send(&mut self, from: PartyId, to: PartyId, msg: Message) -> Result<(), Halt> {
        self.net.send(&mut self.world, from, to, msg)
    }

    fn recv(&mut self, to: PartyId, from: PartyId) -> Result<Message, Halt> {
        Ok(self.net.recv(&mut self.world, to, from)?)
    }

    /// A colluding server passes every classical message on to a partner.
    fn server_recv(&mut self, server: PartyId, from: PartyId) -> Result<Message, Halt> {
        let msg = self.recv(server, from)?;
        if !msg.is_quantum() && self.servers[&server].colludes() {
            let partner = match server {
                Bob1 => Some(Bob2),
                Bob2 | Bob3 => Some(Bob1),
                _ => None,
            };
            if let Some(p) = partner {
                self.send(server, p, msg.clone())?;
            }
        }
        Ok(msg)
    }

    fn server(&mut self, id: PartyId) -> (&mut Server<'static>, &mut World<'a>) {
        (
            self.servers.get_mut(&id).expect("server of this variant"),
            &mut self.world,
        )
    }

    fn alice_angle(&mut self) -> Angle {
        if self.cfg.blinding {
            Angle::new(self.alice.uniform(8) as i64)
        } else {
            Angle::ZERO
        }
    }

    fn abort(&mut self, reason: AbortReason) -> Halt {
        let servers: Vec<PartyId> = self.cfg.variant.servers().collect();
        for s in servers {
            if let Err(h) = self.send(Alice, s, Message::Abort(reason.name().into())) {
                return h;
            }
        }
        Halt::Abort(reason)
    }

    fn expect_len<T>(v: &[T], n: usize) -> Result<(), ProtocolError> {
        if v.len() == n {
            Ok(())
        } else {
            Err(ProtocolError::LengthMismatch {
                expected: n,
                got: v.len(),
            })
        }
    }

    fn inspect_resources(&mut self, qubits: &[QubitId], theta_eff: &[Angle]) {
        if !self.cfg.inspect {
            return;
        }
        let ok = qubits.iter().zip(theta_eff).all(|(&q, &t)| {
            self.world
                .joint_state(&[q])
                .ok()
                .and_then(|s| equal_up_to_phase(&s, &plus_state(t), STATE_TOL).ok())
                .unwrap_or(false)
        });
        self.inspection.resource_states_match = Some(ok);
    }

    fn inspect_pairs(
        &mut self,
        measured: &[(QubitId, QubitId)],
        outer: &[(QubitId, QubitId)],
        labels: &[BellLabel],
    ) {
        if !self.cfg.inspect {
            return;
        }
        let actual: BTreeMap<(QubitId, QubitId), BellLabel> = self
            .world
            .events()
            .iter()
            .filter_map(|e| match e {
                WorldEvent::Bell { a, b, label, .. } => Some(((*a, *b), *label)),
                _ => None,
            })
            .collect();
        let frames = measured
            .iter()
            .zip(labels)
            .all(|(p, l)| actual.get(p) == Some(l));
        let states = outer.iter().zip(labels).all(|(&(a, b), &l)| {
            self.world
                .joint_state(&[a, b])
                .ok()
                .and_then(|s| equal_up_to_phase(&s, &bell_state(l), STATE_TOL).ok())
                .unwrap_or(false)
        });
        self.inspection.frames_match = Some(frames);
        self.inspection.pair_states_match = Some(states);
    }

    /// Blind execution of the computation with `server`, whose qubit `v`
    /// is `|+_{θ_eff[v]}⟩`. Returns the corrected output bits.
    fn bfk_phase(
        &mut self,
        server: PartyId,
        theta_eff: &[Angle],
        qubits: Vec<QubitId>,
    ) -> Result<Vec<u8>, Halt> {
        let comp = self.comp;
        let g = comp.graph();
        let p = comp.pattern();
        self.send(Alice, server, Message::Computation(g.clone()))?;

        let graph = self.server_recv(server, Alice)?.into_graph()?;
        Self::expect_len(&qubits, graph.num_vertices())?;
        for &(a, b) in graph.edges() {
            let (srv, world) = self.server(server);
            srv.cz(world, qubits[a], qubits[b])?;
        }

        let mut s = BTreeMap::new();
        for &v in g.order() {
            let phi = adapted_angle(p.phi(v), &s, p.x_deps(v), p.z_deps(v))?;
            let r = if self.cfg.blinding {
                self.alice.bit()
            } else {
                0
            };
            self.send(
                Alice,
                server,
                Message::AngleSeq(vec![delta_angle(theta_eff[v], phi, r)]),
            )?;

            let delta = self.server_recv(server, Alice)?.into_angles()?;
            Self::expect_len(&delta, 1)?;
            let sign = self.cfg.signs.bfk;
            let (srv, world) = self.server(server);
            let b = srv.measure_angle(world, qubits[v], delta[0], sign)?;
            self.send(server, Alice, Message::BitSeq(vec![b]))?;

            let b = self.recv(Alice, server)?.into_bits()?;
            Self::expect_len(&b, 1)?;
            s.insert(v, b[0] ^ r);
        }

        let mut raw = Vec::with_capacity(graph.outputs().len());
        for &o in graph.outputs() {
            let (srv, world) = self.server(server);
            raw.push(srv.readout(world, qubits[o])?);
        }
        self.send(server, Alice, Message::BitSeq(raw))?;

        let raw = self.recv(Alice, server)?.into_bits()?;
        Self::expect_len(&raw, g.outputs().len())?;
        g.outputs()
            .iter()
            .zip(raw)
            .map(|(&o, bit)| Ok(bit ^ output_byproduct(p, &s, o)?.0))
            .collect()
    }

    fn bfk(&mut self) -> Result<Vec<u8>, Halt> {
        let m = self.m();
        let theta: Vec<Angle> = (0..m).map(|_| self.alice_angle()).collect();
        let qubits: Vec<QubitId> = theta
            .iter()
            .map(|&t| self.world.prepare_plus(Alice, t))
            .collect();
        self.send(Alice, Bob, Message::QubitTransfer(qubits))?;
        let held = self.server_recv(Bob, Alice)?.into_qubits()?;
        self.inspect_resources(&held, &theta);
        self.bfk_phase(Bob, &theta, held)
    }

    fn double(&mut self) -> Result<Vec<u8>, Halt> {
        let m = self.m();
        let pairs: Vec<(QubitId, QubitId)> = (0..m)
            .map(|_| self.world.prepare_bell(Center, BellLabel::PHI_PLUS))
            .collect();
        self.send(
            Center,
            Bob1,
            Message::QubitTransfer(pairs.iter().map(|p| p.0).collect()),
        )?;
        self.send(
            Center,
            Bob2,
            Message::QubitTransfer(pairs.iter().map(|p| p.1).collect()),
        )?;

        let theta: Vec<Angle> = (0..m).map(|_| self.alice_angle()).collect();
        self.send(Alice, Bob1, Message::AngleSeq(theta.clone()))?;

        let b1 = self.server_recv(Bob1, Center)?.into_qubits()?;
        let angles = self.server_recv(Bob1, Alice)?.into_angles()?;
        Self::expect_len(&angles, b1.len())?;
        let sign = self.cfg.signs.frame;
        let mut bits = Vec::with_capacity(m);
        for (&q, &a) in b1.iter().zip(&angles) {
            let (srv, world) = self.server(Bob1);
            bits.push(srv.measure_angle(world, q, a, sign)?);
        }
        self.send(Bob1, Alice, Message::BitSeq(bits))?;

        let bits = self.recv(Alice, Bob1)?.into_bits()?;
        Self::expect_len(&bits, m)?;
        let theta_eff: Vec<Angle> = theta
            .iter()
            .zip(&bits)
            .map(|(t, &b)| t.plus_pi(b))
            .collect();

        let b2 = self.server_recv(Bob2, Center)?.into_qubits()?;
        self.inspect_resources(&b2, &theta_eff);
        self.bfk_phase(Bob2, &theta_eff, b2)
    }

    fn forward(&mut self, items: &[QubitId], by: PartyId) -> Result<Forwarded<QubitId>, Halt> {
        let p = self.cfg.p_forward;
        let rng = if by == Center {
            &mut self.center
        } else {
            &mut self.alice
        };
        let mut fwd = alice_forward(items, p, rng);
        if self.cfg.forward_order == ForwardOrder::Shuffled {
            let mut zipped: Vec<(QubitId, usize)> = fwd
                .items
                .iter()
                .copied()
                .zip(fwd.origin.iter().copied())
                .collect();
            shuffle(&mut zipped, rng);
            (fwd.items, fwd.origin) = zipped.into_iter().unzip();
        }
        for &i in &fwd.dropped {
            self.world.discard(by, items[i])?;
        }
        Ok(fwd)
    }

    /// Pairs survivors, or aborts for a retry when a half has too few.
    fn pair_survivors(&mut self, slots: &[Slot], n: usize) -> Result<PairingRecord, Halt> {
        let m = self.m();
        let first: Vec<usize> = slots
            .iter()
            .filter(|s| matches!(s, Slot::Real(i) if *i < n))
            .map(real)
            .collect();
        let second: Vec<usize> = slots
            .iter()
            .filter(|s| matches!(s, Slot::Real(i) if *i >= n))
            .map(real)
            .collect();
        match choose_pairs(&first, &second, m, &mut self.alice) {
            Ok(p) => Ok(p),
            Err(ProtocolError::InsufficientSurvivors {
                needed,
                first,
                second,
            }) => Err(self.abort(AbortReason::Retry {
                needed,
                first,
                second,
            })),
            Err(e) => Err(e.into()),
        }
    }

    /// Steps run after the server holds the forwarded stream: pairing and
    /// decoy check, remote preparation of the first half, selection of the
    /// second half and the blind computation.
    fn single_tail(
        &mut self,
        n: usize,
        slots: Vec<Slot>,
        decoy_labels: Vec<BellLabel>,
        stream_from: PartyId,
    ) -> Result<Vec<u8>, Halt> {
        let m = self.m();
        let pos = |target: Slot| {
            slots
                .iter()
                .position(|&s| s == target)
                .expect("slot in stream")
        };

        let mut pairing = self.pair_survivors(&slots, n)?;
        let checked = sample_ordered(
            &(0..decoy_labels.len()).collect::<Vec<_>>(),
            self.cfg.l,
            &mut self.alice,
        );
        let mut requests: Vec<Request> = (0..m)
            .map(Request::Pair)
            .chain(checked.iter().map(|&j| Request::Decoy(j)))
            .collect();
        shuffle(&mut requests, &mut self.alice);
        let positions: Vec<usize> = requests
            .iter()
            .flat_map(|r| match *r {
                Request::Pair(i) => [pos(Slot::Real(pairing.s[i])), pos(Slot::Real(pairing.t[i]))],
                Request::Decoy(j) => [pos(Slot::Decoy(j, 0)), pos(Slot::Decoy(j, 1))],
            })
            .collect();
        self.send(Alice, Bob, Message::PositionList(positions))?;

        // server: Bell measurements on the requested pairs
        let bs = self.server_recv(Bob, Center)?.into_qubits()?;
        Self::expect_len(&bs, 2 * n)?;
        let stream = self.server_recv(Bob, stream_from)?.into_qubits()?;
        let req = self.server_recv(Bob, Alice)?.into_positions()?;
        if req.len() % 2 != 0 {
            return Err(ProtocolError::LengthMismatch {
                expected: req.len() + 1,
                got: req.len(),
            }
            .into());
        }
        if let Some(&bad) = req.iter().find(|&&p| p >= stream.len()) {
            return Err(ProtocolError::BadPosition(bad).into());
        }
        let mut labels = Vec::with_capacity(req.len() / 2);
        let mut measured = Vec::with_capacity(req.len() / 2);
        for pair in req.chunks(2) {
            let (a, b) = (stream[pair[0]], stream[pair[1]]);
            let (srv, world) = self.server(Bob);
            labels.push(srv.bell_measure(world, a, b)?);
            measured.push((a, b));
        }
        let requested: BTreeSet<usize> = req.iter().copied().collect();
        for (i, &q) in stream.iter().enumerate() {
            if !requested.contains(&i) {
                let (srv, world) = self.server(Bob);
                srv.discard(world, q)?;
            }
        }
        self.send(Bob, Alice, Message::BellLabelSeq(labels))?;

        let labels = self.recv(Alice, Bob)?.into_labels()?;
        Self::expect_len(&labels, requests.len())?;
        let mut frames = vec![BellLabel::PHI_PLUS; m];
        let mut reported_decoys = Vec::with_capacity(checked.len());
        let mut expected_decoys = Vec::with_capacity(checked.len());
        for (r, &l) in requests.iter().zip(&labels) {
            match *r {
                Request::Pair(i) => frames[i] = l,
                Request::Decoy(j) => {
                    reported_decoys.push(l);
                    expected_decoys.push(decoy_labels[j]);
                }
            }
        }
        if let DecoyVerdict::Cheating { mismatches } =
            verify_decoys(&reported_decoys, &expected_decoys)?
        {
            return Err(self.abort(AbortReason::Cheating { mismatches }));
        }
        pairing.frames = frames;
        if self.cfg.inspect {
            let pair_measured: Vec<(QubitId, QubitId)> = requests
                .iter()
                .zip(&measured)
                .filter(|(r, _)| matches!(r, Request::Pair(_)))
                .map(|(_, &p)| p)
                .collect();
            let order: Vec<usize> = requests
                .iter()
                .filter_map(|r| {
                    if let Request::Pair(i) = r {
                        Some(*i)
                    } else {
                        None
                    }
                })
                .collect();
            let mut outer = vec![(bs[0], bs[0]); m];
            let mut in_order = vec![(bs[0], bs[0]); m];
            let mut frames_in_order = vec![BellLabel::PHI_PLUS; m];
            for (k, &i) in order.iter().enumerate() {
                outer[k] = (bs[pairing.s[i]], bs[pairing.t[i]]);
                in_order[k] = pair_measured[k];
                frames_in_order[k] = pairing.frames[i];
            }
            self.inspect_pairs(&in_order, &outer, &frames_in_order);
        }

        let (theta, bits) = self.remote_prepare(n, &pairing, Bob, Bob, bs[..n].to_vec())?;

        self.send(Alice, Bob, Message::PositionList(pairing.t.clone()))?;
        let keep_idx = self.server_recv(Bob, Alice)?.into_positions()?;
        Self::expect_len(&keep_idx, m)?;
        if let Some(&bad) = keep_idx.iter().find(|&&i| i < n || i >= 2 * n) {
            return Err(ProtocolError::BadPosition(bad).into());
        }
        let kept: Vec<QubitId> = keep_idx.iter().map(|&i| bs[i]).collect();
        for &q in &bs[n..] {
            if !kept.contains(&q) {
                let (srv, world) = self.server(Bob);
                srv.discard(world, q)?;
            }
        }

        let theta_eff: Vec<Angle> = (0..m)
            .map(|i| theta[i].plus_pi(bits[pairing.s[i]]))
            .collect();
        self.inspect_resources(&kept, &theta_eff);
        self.bfk_phase(Bob, &theta_eff, kept)
    }

    /// Announces padded angles for the first half and collects the
    /// server's outcomes. Returns the secret real angles (in pair order)
    /// and every reported bit.
    fn remote_prepare(
        &mut self,
        n: usize,
        pairing: &PairingRecord,
        server: PartyId,
        qubits_from: PartyId,
        first_half: Vec<QubitId>,
    ) -> Result<(Vec<Angle>, Vec<u8>), Halt> {
        let m = self.m();
        let theta: Vec<Angle> = (0..m).map(|_| self.alice_angle()).collect();
        let real: BTreeMap<usize, (Angle, BellLabel)> = (0..m)
            .map(|i| (pairing.s[i], (theta[i], pairing.frames[i])))
            .collect();
        let strategy = if self.cfg.blinding {
            self.cfg.padding
        } else {
            PaddingStrategy::ConstantZero
        };
        let padding = pad_angles(&real, n, strategy, self.cfg.blinding, &mut self.alice)?;
        self.send(Alice, server, Message::AngleSeq(padding.tilde))?;

        let qubits = if qubits_from == server {
            first_half
        } else {
            self.server_recv(server, qubits_from)?.into_qubits()?
        };
        let angles = self.server_recv(server, Alice)?.into_angles()?;
        Self::expect_len(&angles, qubits.len())?;
        let sign = self.cfg.signs.frame;
        let mut bits = Vec::with_capacity(n);
        for (&q, &a) in qubits.iter().zip(&angles) {
            let (srv, world) = self.server(server);
            bits.push(srv.measure_angle(world, q, a, sign)?);
        }
        self.send(server, Alice, Message::BitSeq(bits))?;

        let bits = self.recv(Alice, server)?.into_bits()?;
        Self::expect_len(&bits, n)?;
        Ok((theta, bits))
    }

    fn single(&mut self) -> Result<Vec<u8>, Halt> {
        let m = self.m();
        let n = self.cfg.n_for(m);
        let pairs: Vec<(QubitId, QubitId)> = (0..2 * n)
            .map(|_| self.world.prepare_bell(Center, BellLabel::PHI_PLUS))
            .collect();
        self.send(
            Center,
            Bob,
            Message::QubitTransfer(pairs.iter().map(|p| p.0).collect()),
        )?;
        let decoys = make_decoys(&mut self.world, self.cfg.h, &mut self.center);
        let h = decoys.labels.len();
        let mut to_alice: Vec<QubitId> = pairs.iter().map(|p| p.1).collect();
        to_alice.extend(decoys.first());
        to_alice.extend(decoys.second());
        self.send(Center, Alice, Message::QubitTransfer(to_alice))?;
        let announced: Vec<usize> = (0..h).flat_map(|j| [2 * n + j, 2 * n + h + j]).collect();
        self.send(
            Center,
            Alice,
            Message::DecoyAnnounce {
                labels: decoys.labels.clone(),
                positions: announced,
            },
        )?;

        let received = self.recv(Alice, Center)?.into_qubits()?;
        let (labels, dpos) = self.recv(Alice, Center)?.into_decoys()?;
        Self::expect_len(&dpos, 2 * labels.len())?;
        let real: Vec<QubitId> = received.iter().take(2 * n).copied().collect();
        Self::expect_len(&real, 2 * n)?;
        let fwd = self.forward(&real, Alice)?;
        let decoy_qubits: Vec<QubitId> = dpos
            .iter()
            .map(|&p| {
                received
                    .get(p)
                    .copied()
                    .ok_or(ProtocolError::BadPosition(p))
            })
            .collect::<Result<_, _>>()?;
        let decoy_slots: Vec<(QubitId, Slot)> = decoy_qubits
            .iter()
            .enumerate()
            .map(|(k, &q)| (q, Slot::Decoy(k / 2, (k % 2) as u8)))
            .collect();
        let base: Vec<(QubitId, Slot)> = fwd
            .items
            .iter()
            .copied()
            .zip(fwd.origin.iter().map(|&i| Slot::Real(i)))
            .collect();
        let (stream, _) = interleave(&base, &decoy_slots, &mut self.alice);
        let (stream, slots): (Vec<QubitId>, Vec<Slot>) = stream.into_iter().unzip();
        self.send(Alice, Bob, Message::QubitTransfer(stream))?;

        self.single_tail(n, slots, labels, Alice)
    }

    fn single_classical(&mut self) -> Result<Vec<u8>, Halt> {
        let m = self.m();
        let n = self.cfg.n_for(m);
        let pairs: Vec<(QubitId, QubitId)> = (0..2 * n)
            .map(|_| self.world.prepare_bell(Center, BellLabel::PHI_PLUS))
            .collect();
        self.send(
            Center,
            Bob,
            Message::QubitTransfer(pairs.iter().map(|p| p.0).collect()),
        )?;
        let halves: Vec<QubitId> = pairs.iter().map(|p| p.1).collect();
        let fwd = self.forward(&halves, Center)?;
        let decoys = make_decoys(&mut self.world, self.cfg.h, &mut self.center);
        let decoy_items: Vec<(QubitId, Option<usize>)> = decoys
            .pairs
            .iter()
            .flat_map(|&(a, b)| [(a, None), (b, None)])
            .collect();
        let base: Vec<(QubitId, Option<usize>)> = fwd
            .items
            .iter()
            .copied()
            .zip(fwd.origin.iter().map(|&i| Some(i)))
            .collect();
        let (stream, dpos) = interleave(&base, &decoy_items, &mut self.center);
        let origins: Vec<usize> = stream.iter().filter_map(|s| s.1).collect();
        self.send(
            Center,
            Bob,
            Message::QubitTransfer(stream.iter().map(|s| s.0).collect()),
        )?;
        self.send(Center, Alice, Message::PositionList(origins))?;
        self.send(
            Center,
            Alice,
            Message::DecoyAnnounce {
                labels: decoys.labels.clone(),
                positions: dpos,
            },
        )?;

        let origins = self.recv(Alice, Center)?.into_positions()?;
        let (labels, dpos) = self.recv(Alice, Center)?.into_decoys()?;
        Self::expect_len(&dpos, 2 * labels.len())?;
        let total = origins.len() + dpos.len();
        let mut slots: Vec<Option<Slot>> = vec![None; total];
        for (k, &p) in dpos.iter().enumerate() {
            *slots.get_mut(p).ok_or(ProtocolError::BadPosition(p))? =
                Some(Slot::Decoy(k / 2, (k % 2) as u8));
        }
        let mut next = origins.iter();
        let slots: Vec<Slot> = slots
            .into_iter()
            .map(|s| {
                s.unwrap_or_else(|| Slot::Real(*next.next().expect("one origin per free slot")))
            })
            .collect();

        self.single_tail(n, slots, labels, Center)
    }

    fn triple(&mut self) -> Result<Vec<u8>, Halt> {
        let m = self.m();
        let n = self.cfg.n_for(m);
        let p1: Vec<(QubitId, QubitId)> = (0..n)
            .map(|_| self.world.prepare_bell(Center, BellLabel::PHI_PLUS))
            .collect();
        let p2: Vec<(QubitId, QubitId)> = (0..n)
            .map(|_| self.world.prepare_bell(Center, BellLabel::PHI_PLUS))
            .collect();
        self.send(
            Center,
            Bob1,
            Message::QubitTransfer(p1.iter().map(|p| p.0).collect()),
        )?;
        self.send(
            Center,
            Bob2,
            Message::QubitTransfer(p2.iter().map(|p| p.0).collect()),
        )?;
        let to_alice: Vec<QubitId> = p1.iter().chain(&p2).map(|p| p.1).collect();
        self.send(Center, Alice, Message::QubitTransfer(to_alice))?;

        let received = self.recv(Alice, Center)?.into_qubits()?;
        Self::expect_len(&received, 2 * n)?;
        let fwd = self.forward(&received, Alice)?;
        let slots: Vec<Slot> = fwd.origin.iter().map(|&i| Slot::Real(i)).collect();
        self.send(Alice, Bob3, Message::QubitTransfer(fwd.items.clone()))?;

        let mut pairing = self.pair_survivors(&slots, n)?;
        let pos = |i: usize| {
            slots
                .iter()
                .position(|&s| s == Slot::Real(i))
                .expect("survivor in stream")
        };
        let positions: Vec<usize> = (0..m)
            .flat_map(|i| [pos(pairing.s[i]), pos(pairing.t[i])])
            .collect();
        self.send(Alice, Bob3, Message::PositionList(positions))?;

        let stream = self.server_recv(Bob3, Alice)?.into_qubits()?;
        let req = self.server_recv(Bob3, Alice)?.into_positions()?;
        if let Some(&bad) = req.iter().find(|&&p| p >= stream.len()) {
            return Err(ProtocolError::BadPosition(bad).into());
        }
        let mut labels = Vec::new();
        let mut measured = Vec::new();
        for pair in req.chunks(2) {
            let (a, b) = (stream[pair[0]], stream[pair[1]]);
            let (srv, world) = self.server(Bob3);
            labels.push(srv.bell_measure(world, a, b)?);
            measured.push((a, b));
        }
        let requested: BTreeSet<usize> = req.iter().copied().collect();
        for (i, &q) in stream.iter().enumerate() {
            if !requested.contains(&i) {
                let (srv, world) = self.server(Bob3);
                srv.discard(world, q)?;
            }
        }
        self.send(Bob3, Alice, Message::BellLabelSeq(labels))?;

        let labels = self.recv(Alice, Bob3)?.into_labels()?;
        Self::expect_len(&labels, m)?;
        pairing.frames = labels;
        let outer: Vec<(QubitId, QubitId)> = (0..m)
            .map(|i| (p1[pairing.s[i]].0, p2[pairing.t[i] - n].0))
            .collect();
        self.inspect_pairs(&measured, &outer, &pairing.frames.clone());

        let (theta, bits) = self.remote_prepare(n, &pairing, Bob1, Center, Vec::new())?;

        let t_local: Vec<usize> = pairing.t.iter().map(|&t| t - n).collect();
        self.send(Alice, Bob2, Message::PositionList(t_local))?;
        let b2 = self.server_recv(Bob2, Center)?.into_qubits()?;
        let keep_idx = self.server_recv(Bob2, Alice)?.into_positions()?;
        Self::expect_len(&keep_idx, m)?;
        if let Some(&bad) = keep_idx.iter().find(|&&i| i >= b2.len()) {
            return Err(ProtocolError::BadPosition(bad).into());
        }
        let kept: Vec<QubitId> = keep_idx.iter().map(|&i| b2[i]).collect();
        for &q in &b2 {
            if !kept.contains(&q) {
                let (srv, world) = self.server(Bob2);
                srv.discard(world, q)?;
            }
        }

        let theta_eff: Vec<Angle> = (0..m)
            .map(|i| theta[i].plus_pi(bits[pairing.s[i]]))
            .collect();
        self.inspect_resources(&kept, &theta_eff);
        self.bfk_phase(Bob2, &theta_eff, kept)
    }
}

fn real(s: &Slot) -> usize {
    match s {
        Slot::Real(i) => *i,
        Slot::Decoy(..) => unreachable!("filtered to real slots"),
    }
}

fn check_variant(cfg: &RunConfig, variant: Variant, classical: bool) -> Result<(), ProtocolError> {
    if cfg.variant != variant || cfg.classical_client != classical {
        return Err(ProtocolError::Config(format!(
            "configuration is for the {:?} protocol{}",
            cfg.variant,
            if cfg.classical_client {
                " with a classical client"
            } else {
                ""
            }
        )));
    }
    Ok(())
}

/// One attempt of the configured protocol, with measurement outcomes drawn
/// from `nature`.
fn attempt<'a>(
    cfg: &'a RunConfig,
    comp: &'a Computation,
    seeds: SeedTree,
    nature: Box<dyn BranchSampler + 'a>,
) -> Result<ProtocolResult, ProtocolError> {
    cfg.validate()?;
    validate_signs(cfg)?;
    if let Some(m) = cfg.m {
        if m != comp.graph().num_vertices() {
            return Err(ProtocolError::Config(format!(
                "m = {m} but the computation has {} vertices",
                comp.graph().num_vertices()
            )));
        }
    }
    let mut sess = Session::new(cfg, comp, seeds, nature);
    let run = match (cfg.variant, cfg.classical_client) {
        (Variant::Bfk, _) => sess.bfk(),
        (Variant::Double, _) => sess.double(),
        (Variant::Triple, _) => sess.triple(),
        (Variant::Single, false) => sess.single(),
        (Variant::Single, true) => sess.single_classical(),
    };
    let outcome = match run {
        Ok(output) => RunOutcome::Completed { output },
        Err(Halt::Abort(reason)) => RunOutcome::Aborted { reason },
        Err(Halt::Fault(e)) => return Err(e),
    };
    Ok(ProtocolResult {
        variant: cfg.variant,
        outcome,
        transcript: sess.net.into_transcript(),
        inspection: cfg.inspect.then_some(sess.inspection),
        attempts: 1,
    })
}

fn nature_for(seeds: SeedTree) -> Box<dyn BranchSampler> {
    Box::new(RngSampler(seeds.child("nature").rng()))
}

/// Runs whichever protocol `cfg` names, once.
pub fn run_protocol(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
) -> Result<ProtocolResult, ProtocolError> {
    attempt(cfg, comp, seeds, nature_for(seeds))
}

pub fn run_bfk(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
) -> Result<ProtocolResult, ProtocolError> {
    check_variant(cfg, Variant::Bfk, false)?;
    run_protocol(cfg, comp, seeds)
}

pub fn run_double_server(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
) -> Result<ProtocolResult, ProtocolError> {
    check_variant(cfg, Variant::Double, false)?;
    run_protocol(cfg, comp, seeds)
}

pub fn run_triple_server(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
) -> Result<ProtocolResult, ProtocolError> {
    check_variant(cfg, Variant::Triple, false)?;
    run_protocol(cfg, comp, seeds)
}

pub fn run_single_server(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
) -> Result<ProtocolResult, ProtocolError> {
    check_variant(cfg, Variant::Single, false)?;
    run_protocol(cfg, comp, seeds)
}

pub fn run_single_server_classical(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
) -> Result<ProtocolResult, ProtocolError> {
    check_variant(cfg, Variant::Single, true)?;
    run_protocol(cfg, comp, seeds)
}

/// Repeats the protocol with fresh randomness while it aborts for lack of
/// surviving particles, up to `max_attempts` times.
pub fn run_with_retries(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
    max_attempts: usize,
) -> Result<ProtocolResult, ProtocolError> {
    let mut last = None;
    for k in 0..max_attempts.max(1) {
        let mut r = run_protocol(cfg, comp, seeds.child("attempt").index(k as u64))?;
        r.attempts = k + 1;
        let retry = matches!(r.outcome.abort_reason(), Some(AbortReason::Retry { .. }));
        last = Some(r);
        if !retry {
            break;
        }
    }
    Ok(last.expect("at least one attempt"))
}

/// Exact output statistics of one protocol configuration with the
/// classical randomness fixed by `seeds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRun {
    /// Probability of each output bitstring over completed runs.
    pub distribution: Distribution,
    /// Total probability of aborted runs, by abort name.
    pub aborted: BTreeMap<String, f64>,
    /// Measurement branches enumerated.
    pub paths: usize,
}

/// Sums every measurement branch of the protocol, each weighted by its Born
/// probability.
pub fn exact_output_distribution(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
    budget: usize,
) -> Result<ExactRun, ProtocolError> {
    let mut distribution = Distribution::new();
    let mut aborted = BTreeMap::new();
    let paths = for_each_path(
        budget,
        |tape: &mut ExhaustiveTape| attempt(cfg, comp, seeds, Box::new(tape)),
        |w, r| match r.outcome {
            RunOutcome::Completed { output } => {
                *distribution.entry(bits_to_string(&output)).or_insert(0.0) += w
            }
            RunOutcome::Aborted { reason } => {
                *aborted.entry(reason.name().to_string()).or_insert(0.0) += w
            }
        },
    )
    .map_err(|e| match e {
        EnumerateError::Body(e) => e,
        EnumerateError::BudgetExceeded { budget } => {
            ProtocolError::Config(format!("more than {budget} measurement branches"))
        }
    })?;
    distribution.retain(|_, p| *p > 1e-15);
    Ok(ExactRun {
        distribution,
        aborted,
        paths,
    })
}

/// Exact statistics of [`run_with_retries`]: whatever probability mass ends
/// in a retry abort is carried over to the next attempt seed.
pub fn exact_with_retries(
    cfg: &RunConfig,
    comp: &Computation,
    seeds: SeedTree,
    budget: usize,
    max_attempts: usize,
) -> Result<ExactRun, ProtocolError> {
    let mut total = ExactRun {
        distribution: Distribution::new(),
        aborted: BTreeMap::new(),
        paths: 0,
    };
    let mut weight = 1.0;
    for k in 0..max_attempts.max(1) {
        let mut run =
            exact_output_distribution(cfg, comp, seeds.child("attempt").index(k as u64), budget)?;
        total.paths += run.paths;
        for (bits, p) in run.distribution {
            *total.distribution.entry(bits).or_insert(0.0) += weight * p;
        }
        let retry = if k + 1 < max_attempts {
            run.aborted.remove("retry").unwrap_or(0.0)
        } else {
            0.0
        };
        for (name, p) in run.aborted {
            *total.aborted.entry(name).or_insert(0.0) += weight * p;
        }
        weight *= retry;
        if weight <= 1e-15 {
            break;
        }
    }
    Ok(total)
}

/// Outcome of a decoy check in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoyTrial {
    pub checked: usize,
    pub mismatches: usize,
}

impl DecoyTrial {
    pub fn caught(&self) -> bool {
        self.mismatches > 0
    }
}

/// Only the decoy part of the single-server protocol: the center prepares
/// `h` decoy pairs, the client forwards them to a server running
/// `strategy` and checks `l` of them.
pub fn decoy_trial(
    h: usize,
    l: usize,
    strategy: Strategy,
    seeds: SeedTree,
) -> Result<DecoyTrial, ProtocolError> {
    if l > h {
        return Err(ProtocolError::Config(format!(
            "cannot check {l} of {h} decoys"
        )));
    }
    let mut world = World::new(nature_for(seeds));
    let mut net = Network::new(ChannelPolicy::for_variant(Variant::Single));
    let mut center = RngSampler(seeds.child("center").rng());
    let mut alice = RngSampler(seeds.child("alice").rng());
    let mut bob = Server::new(
        Bob,
        strategy,
        Box::new(RngSampler(seeds.child("server").child("Bob").rng())),
    );
    let halt = |h: Halt| match h {
        Halt::Fault(e) => e,
        Halt::Abort(r) => ProtocolError::Config(format!("unexpected abort: {r}")),
    };

    let decoys = make_decoys(&mut world, h, &mut center);
    let mut all = decoys.first();
    all.extend(decoys.second());
    net.send(&mut world, Center, Alice, Message::QubitTransfer(all))
        .map_err(halt)?;
    let received = net.recv(&mut world, Alice, Center)?.into_qubits()?;

    let mut order: Vec<usize> = (0..2 * h).collect();
    shuffle(&mut order, &mut alice);
    let stream: Vec<QubitId> = order.iter().map(|&i| received[i]).collect();
    let where_is = |i: usize| {
        order
            .iter()
            .position(|&o| o == i)
            .expect("every decoy forwarded")
    };
    net.send(&mut world, Alice, Bob, Message::QubitTransfer(stream))
        .map_err(halt)?;
    let checked = sample_ordered(&(0..h).collect::<Vec<_>>(), l, &mut alice);
    let positions: Vec<usize> = checked
        .iter()
        .flat_map(|&j| [where_is(j), where_is(h + j)])
        .collect();
    net.send(&mut world, Alice, Bob, Message::PositionList(positions))
        .map_err(halt)?;

    let stream = net.recv(&mut world, Bob, Alice)?.into_qubits()?;
    let req = net.recv(&mut world, Bob, Alice)?.into_positions()?;
    let labels = req
        .chunks(2)
        .map(|p| bob.bell_measure(&mut world, stream[p[0]], stream[p[1]]))
        .collect::<Result<Vec<_>, _>>()?;
    net.send(&mut world, Bob, Alice, Message::BellLabelSeq(labels))
        .map_err(halt)?;

    let reported = net.recv(&mut world, Alice, Bob)?.into_labels()?;
    let expected: Vec<BellLabel> = checked.iter().map(|&j| decoys.labels[j]).collect();
    let mismatches = match verify_decoys(&reported, &expected)? {
        DecoyVerdict::Pass => 0,
        DecoyVerdict::Cheating { mismatches } => mismatches,
    };
    Ok(DecoyTrial {
        checked: l,
        mismatches,
    })
}

#[cfg(test)]
#[path = "protocol_tests.rs"]
mod tests;
