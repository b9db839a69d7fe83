//! D25 parallel port emulation and the host-side ADC handshake.
//!
//! Register conventions (SPP, base address 0x378 by default):
//!
//! | register | offset | meaningful bits | hardware-inverted |
//! |----------|--------|-----------------|-------------------|
//! | data     | +0     | D0–D7           | none              |
//! | status   | +1     | S3–S7           | S7                |
//! | control  | +2     | C0–C3, C5 (dir) | C0, C1, C3        |
//!
//! Status reads return `wire ^ 0x80` with S0–S2 forced to zero. Control
//! writes put `value ^ 0x0B` on the wire. C5 set turns the data lines into
//! inputs so the converter's outputs can be read back (bidirectional mode).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::adc0808::{check_clock, sar_convert, AdcCode, AdcConfig, BITS, CHANNELS};
use crate::error::{Error, Result};
use crate::stimulus::AnalogInput;

pub const DEFAULT_BASE_ADDR: u16 = 0x378;
pub const STATUS_INVERT: u8 = 0x80;
pub const STATUS_MASK: u8 = 0xF8;
pub const CONTROL_INVERT: u8 = 0x0B;
pub const CONTROL_DIRECTION_BIT: u8 = 5;
/// What the host reads from undriven data lines.
pub const HIGH_Z: u8 = 0xFF;

const NS_PER_S: f64 = 1e9;

pub fn secs_to_ns(s: f64) -> u64 {
    (s * NS_PER_S).round() as u64
}

pub fn ns_to_secs(ns: u64) -> f64 {
    ns as f64 / NS_PER_S
}

/// Register file. `status` and `control` hold wire levels; the accessors
/// apply the inversion masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortRegisters {
    pub data: u8,
    status: u8,
    control: u8,
    pub base_addr: u16,
}

impl Default for PortRegisters {
    fn default() -> Self {
        PortRegisters {
            data: 0,
            status: 0,
            // Power-up software value 0x00.
            control: CONTROL_INVERT,
            base_addr: DEFAULT_BASE_ADDR,
        }
    }
}

impl PortRegisters {
    pub fn write_control(&mut self, value: u8) {
        self.control = value ^ CONTROL_INVERT;
    }

    pub fn read_control(&self) -> u8 {
        self.control ^ CONTROL_INVERT
    }

    pub fn read_status(&self) -> u8 {
        (self.status ^ STATUS_INVERT) & STATUS_MASK
    }

    pub fn control_wire(&self) -> u8 {
        self.control
    }

    pub fn status_wire(&self) -> u8 {
        self.status
    }

    /// Device side: drive a status line.
    pub fn set_status_line(&mut self, bit: u8, high: bool) {
        if high {
            self.status |= 1 << bit;
        } else {
            self.status &= !(1 << bit);
        }
    }

    pub fn control_line(&self, bit: u8) -> bool {
        self.control & (1 << bit) != 0
    }

    pub fn data_is_input(&self) -> bool {
        self.control_line(CONTROL_DIRECTION_BIT)
    }
}

/// Software value that produces the given control wire levels.
pub fn control_value_for_wire(wire: u8) -> u8 {
    wire ^ CONTROL_INVERT
}

/// Wire level of a status line given a byte read from the status register.
pub fn status_line_from_read(read: u8, bit: u8) -> bool {
    ((read ^ STATUS_INVERT) >> bit) & 1 != 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataPath {
    #[default]
    Bidirectional,
    /// Two 4-bit reads over status lines. Not implemented.
    Nibble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandshakeMap {
    /// Control bit tied to both START and ALE.
    pub start_ale: u8,
    pub output_enable: u8,
    /// Status bit carrying EOC.
    pub eoc: u8,
    pub data_path: DataPath,
}

impl Default for HandshakeMap {
    fn default() -> Self {
        HandshakeMap {
            start_ale: 0,
            output_enable: 1,
            eoc: 3,
            data_path: DataPath::Bidirectional,
        }
    }
}

impl HandshakeMap {
    pub fn validate(&self) -> Result<()> {
        if self.start_ale > 3 || self.output_enable > 3 {
            return Err(Error::invalid(
                "handshake control bits must be within C0..C3",
            ));
        }
        if self.start_ale == self.output_enable {
            return Err(Error::invalid(
                "start_ale and output_enable share a control bit",
            ));
        }
        if !(3..=7).contains(&self.eoc) {
            return Err(Error::invalid("eoc must be a status bit within S3..S7"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandshakeTiming {
    /// EOC is polled every `latency / poll_divisor`.
    pub poll_divisor: u32,
    /// Give up after this many conversion latencies.
    pub timeout_latencies: f64,
}

impl Default for HandshakeTiming {
    fn default() -> Self {
        HandshakeTiming {
            poll_divisor: 16,
            timeout_latencies: 10.0,
        }
    }
}

/// The three port primitives a backend provides.
pub trait PortBackend {
    fn read_data(&mut self) -> u8;
    fn read_status(&mut self) -> u8;
    fn write_control(&mut self, value: u8);
}

/// Services the handshake needs beyond the port registers: the backend's
/// monotonic time counter and the converter's mux address lines.
pub trait HostLink: PortBackend {
    fn now_ns(&self) -> u64;
    fn wait_ns(&mut self, ns: u64);
    fn select_channel(&mut self, channel: u8) -> Result<()>;
}

/// Start a conversion on `channel`, wait for EOC and read the result byte.
pub fn acquire_byte<B: HostLink + ?Sized>(
    port: &mut B,
    map: &HandshakeMap,
    timing: &HandshakeTiming,
    adc: &AdcConfig,
    clock_hz: f64,
    channel: u8,
) -> Result<AdcCode> {
    map.validate()?;
    if map.data_path == DataPath::Nibble {
        return Err(Error::UnsupportedMode("nibble"));
    }
    check_clock(clock_hz)?;
    adc.validate()?;
    if timing.poll_divisor == 0
        || timing.timeout_latencies.is_nan()
        || timing.timeout_latencies <= 0.0
    {
        return Err(Error::invalid("handshake timing must be positive"));
    }

    let latency_s = adc.latency_s(clock_hz);
    let poll_ns = (secs_to_ns(latency_s) / timing.poll_divisor as u64).max(1);
    let timeout_ns = secs_to_ns(latency_s * timing.timeout_latencies);

    let idle = 1 << CONTROL_DIRECTION_BIT;
    let start = idle | 1 << map.start_ale;
    let enable = idle | 1 << map.output_enable;

    port.select_channel(channel)?;
    port.write_control(control_value_for_wire(idle));
    port.write_control(control_value_for_wire(start));
    port.write_control(control_value_for_wire(idle));

    let started = port.now_ns();
    loop {
        if status_line_from_read(port.read_status(), map.eoc) {
            break;
        }
        let waited = port.now_ns() - started;
        if waited >= timeout_ns {
            return Err(Error::DeviceTimeout {
                waited_s: ns_to_secs(waited),
            });
        }
        port.wait_ns(poll_ns);
    }

    port.write_control(control_value_for_wire(enable));
    let code = port.read_data();
    port.write_control(control_value_for_wire(idle));

    let mut sar_trace = [false; BITS as usize];
    for (i, bit) in sar_trace.iter_mut().enumerate() {
        *bit = code & (0x80 >> i) != 0;
    }
    Ok(AdcCode {
        code,
        sar_trace,
        latency_s,
        channel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AdcState {
    Idle,
    /// START high: SAR held in reset, EOC low.
    Reset,
    Converting {
        done_at_ns: u64,
        result: u8,
    },
}

/// ADC0808 wired to the port, with an analog front end per mux input and a
/// simulated time counter.
#[derive(Debug)]
pub struct SimulatedBackend {
    regs: PortRegisters,
    map: HandshakeMap,
    adc: AdcConfig,
    clock_hz: f64,
    inputs: Vec<Option<AnalogInput>>,
    address_lines: u8,
    latched_address: u8,
    state: AdcState,
    output_latch: u8,
    now_ns: u64,
    connected: bool,
    disconnect_at_ns: Option<u64>,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
    fault: Option<Error>,
}

impl SimulatedBackend {
    pub fn new(adc: AdcConfig, clock_hz: f64, map: HandshakeMap, seed: u64) -> Result<Self> {
        adc.validate()?;
        check_clock(clock_hz)?;
        map.validate()?;
        let noise = if adc.noise_sigma_lsb > 0.0 {
            let normal = Normal::new(0.0, adc.noise_sigma_lsb * adc.lsb_volts())
                .map_err(|e| Error::invalid(e.to_string()))?;
            Some((ChaCha8Rng::seed_from_u64(seed), normal))
        } else {
            None
        };
        Ok(SimulatedBackend {
            regs: PortRegisters::default(),
            map,
            adc,
            clock_hz,
            inputs: (0..CHANNELS).map(|_| None).collect(),
            address_lines: 0,
            latched_address: 0,
            state: AdcState::Idle,
            output_latch: 0,
            now_ns: 0,
            connected: true,
            disconnect_at_ns: None,
            noise,
            fault: None,
        })
    }

    pub fn attach_input(&mut self, channel: u8, input: AnalogInput) -> Result<()> {
        let slot = self
            .inputs
            .get_mut(channel as usize)
            .ok_or_else(|| Error::invalid(format!("channel {channel} out of range")))?;
        *slot = Some(input);
        Ok(())
    }

    /// Simulates a missing or dead device: EOC never rises and the data
    /// lines float.
    pub fn disconnect(&mut self) {
        self.connected = false;
        self.state = AdcState::Idle;
        self.regs.set_status_line(self.map.eoc, false);
    }

    /// Disconnects the device once simulated time reaches `t_ns`.
    pub fn schedule_disconnect(&mut self, t_ns: u64) {
        self.disconnect_at_ns = Some(t_ns);
        self.apply_schedule();
    }

    fn apply_schedule(&mut self) {
        if self.connected && self.disconnect_at_ns.is_some_and(|at| self.now_ns >= at) {
            self.disconnect();
        }
    }

    pub fn registers(&self) -> &PortRegisters {
        &self.regs
    }

    /// Advances simulated time without any port activity.
    pub fn advance_to_ns(&mut self, t_ns: u64) {
        if t_ns > self.now_ns {
            self.now_ns = t_ns;
        }
        self.apply_schedule();
    }

    /// Error raised inside the device model since the last call, if any.
    pub fn take_fault(&mut self) -> Option<Error> {
        self.fault.take()
    }

    fn refresh_eoc(&mut self) {
        let eoc = match self.state {
            AdcState::Idle => true,
            AdcState::Reset => false,
            AdcState::Converting { done_at_ns, result } => {
                let done = self.now_ns >= done_at_ns;
                if done {
                    self.output_latch = result;
                }
                done
            }
        };
        self.regs
            .set_status_line(self.map.eoc, self.connected && eoc);
    }

    fn start_conversion(&mut self) {
        let channel = self.latched_address;
        let t_s = ns_to_secs(self.now_ns);
        let held = match self.inputs[channel as usize].as_mut() {
            Some(input) => input.voltage_at(t_s),
            None => Ok(0.0),
        };
        let held = held.map(|v| match self.noise.as_mut() {
            Some((rng, normal)) => v + normal.sample(rng),
            None => v,
        });
        match held.and_then(|v| sar_convert(v, channel, self.clock_hz, &self.adc)) {
            Ok(code) => {
                self.state = AdcState::Converting {
                    done_at_ns: self.now_ns + secs_to_ns(code.latency_s),
                    result: code.code,
                };
            }
            Err(e) => {
                // Leave EOC low so the host sees a wedged device.
                self.fault = Some(e);
                self.state = AdcState::Reset;
            }
        }
    }
}

impl PortBackend for SimulatedBackend {
    fn read_data(&mut self) -> u8 {
        self.refresh_eoc();
        let driven = self.connected
            && self.regs.data_is_input()
            && self.regs.control_line(self.map.output_enable);
        if driven {
            self.regs.data = self.output_latch;
            self.output_latch
        } else {
            HIGH_Z
        }
    }

    fn read_status(&mut self) -> u8 {
        self.refresh_eoc();
        self.regs.read_status()
    }

    fn write_control(&mut self, value: u8) {
        let before = self.regs;
        self.regs.write_control(value);
        if !self.connected {
            return;
        }
        let bit = self.map.start_ale;
        let rose = !before.control_line(bit) && self.regs.control_line(bit);
        let fell = before.control_line(bit) && !self.regs.control_line(bit);
        if rose {
            // ALE latches the address; START's rising edge resets the SAR.
            self.latched_address = self.address_lines;
            self.state = AdcState::Reset;
            self.refresh_eoc();
        } else if fell {
            self.start_conversion();
            self.refresh_eoc();
        }
    }
}

impl HostLink for SimulatedBackend {
    fn now_ns(&self) -> u64 {
        self.now_ns
    }

    fn wait_ns(&mut self, ns: u64) {
        self.now_ns += ns;
        self.apply_schedule();
    }

    fn select_channel(&mut self, channel: u8) -> Result<()> {
        if channel >= CHANNELS {
            return Err(Error::invalid(format!(
                "channel {channel} out of range 0..{CHANNELS}"
            )));
        }
        self.address_lines = channel;
        Ok(())
    }
}
