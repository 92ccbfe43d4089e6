/// IEEE binary16 bits of `x`, round to nearest even. Overflow gives infinity.
pub fn f32_to_f16_bits(x: f32) -> u16 {
    let bits = x.to_bits();
    let sign = ((bits >> 16) & 0x8000) as u16;
    let exp = ((bits >> 23) & 0xff) as i32;
    let man = bits & 0x7f_ffff;
    if exp == 0xff {
        return sign | 0x7c00 | if man != 0 { 0x200 } else { 0 };
    }
    // Exact value is man_full * 2^(e - 23).
    let e = exp - 127;
    let man_full = if exp == 0 { man } else { man | 0x80_0000 };
    let e = if exp == 0 { -126 } else { e };
    if man_full == 0 {
        return sign;
    }
    // Target quantum: 2^-24 for subnormals, 2^(e-10) for normals.
    let half_e = e.max(-14);
    let shift = (half_e - 10) - (e - 23);
    let q = round_shift(man_full as u64, shift);
    // q is the significand in units of 2^(half_e - 10).
    let (mut he, mut hq) = (half_e, q);
    if hq >= 1 << 11 {
        hq >>= 1;
        he += 1;
    }
    if he > 15 {
        return sign | 0x7c00;
    }
    if hq < 1 << 10 {
        return sign | hq as u16;
    }
    sign | (((he + 15) as u16) << 10) | (hq as u16 & 0x3ff)
}

fn round_shift(v: u64, shift: i32) -> u64 {
    if shift <= 0 {
        return v << (-shift);
    }
    if shift >= 64 {
        return 0;
    }
    let q = v >> shift;
    let rem = v & ((1u64 << shift) - 1);
    let half = 1u64 << (shift - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

pub fn f16_bits_to_f64(h: u16) -> f64 {
    let sign = if h & 0x8000 != 0 { -1.0 } else { 1.0 };
    let exp = ((h >> 10) & 0x1f) as i32;
    let man = (h & 0x3ff) as f64;
    match exp {
        0 => sign * man * 2f64.powi(-24),
        31 if man == 0.0 => sign * f64::INFINITY,
        31 => f64::NAN,
        _ => sign * (1.0 + man / 1024.0) * 2f64.powi(exp - 15),
    }
}
