"""Energy accounting: every flit movement charges a per-bit rate to a
category and, for data movements, to the owning packet."""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import EnergyParams

CATEGORIES = ("wireless", "serial", "wide", "wire", "switch", "control", "static")

_LINK_CATEGORY = {
    "wireless": "wireless",
    "serial_io": "serial",
    "wide_io": "wide",
    "mesh_wire": "wire",
    "interposer_wire": "wire",
}


class EnergyError(ValueError):
    pass


@dataclass
class EnergyLedger:
    """Per-packet and per-category picojoule accumulators."""

    params: EnergyParams = field(default_factory=EnergyParams)
    per_packet: dict[int, float] = field(default_factory=dict)
    per_packet_category: dict[int, dict[str, float]] = field(default_factory=dict)
    category_totals: dict[str, float] = field(
        default_factory=lambda: {c: 0.0 for c in CATEGORIES}
    )

    def charge_hop(self, packet_id: int | None, bits: int, category: str) -> float:
        """Charge ``bits`` at the category's configured rate; returns pJ added.

        ``packet_id`` None charges the category only (control/static traffic
        is not attributed to any data packet).
        """
        rate = self._rate(category)
        pj = bits * rate
        self.charge_pj(packet_id, pj, category)
        return pj

    def charge_pj(self, packet_id: int | None, pj: float, category: str) -> None:
        if category not in self.category_totals:
            raise EnergyError(f"unknown energy category {category!r}")
        self.category_totals[category] += pj
        if packet_id is not None:
            self.per_packet[packet_id] = self.per_packet.get(packet_id, 0.0) + pj
            cat = self.per_packet_category.setdefault(packet_id, {})
            cat[category] = cat.get(category, 0.0) + pj

    def _rate(self, category: str) -> float:
        p = self.params
        try:
            return {
                "wireless": p.wireless_pj_per_bit,
                "serial": p.serialio_pj_per_bit,
                "wide": p.wideio_pj_per_bit,
                "wire": p.mesh_wire_pj_per_bit,
                "switch": p.switch_dynamic_pj_per_bit,
                "control": p.wireless_pj_per_bit,
            }[category]
        except KeyError:
            raise EnergyError(f"unknown energy category {category!r}") from None

    @staticmethod
    def link_category(link_kind_value: str) -> str:
        return _LINK_CATEGORY[link_kind_value]

    def packet_total(self, packet_id: int) -> float:
        return self.per_packet.get(packet_id, 0.0)

    def packet_category(self, packet_id: int, category: str) -> float:
        return self.per_packet_category.get(packet_id, {}).get(category, 0.0)

    @property
    def grand_total(self) -> float:
        return sum(self.category_totals.values())

    def avg_packet_energy(self, delivered: set[int] | list[int]) -> float:
        """Mean per-packet pJ over the delivered set (data categories only)."""
        delivered = list(delivered)
        if not delivered:
            raise EnergyError("avg_packet_energy over an empty delivered set")
        return sum(self.per_packet.get(p, 0.0) for p in delivered) / len(delivered)

    def check_consistency(self) -> None:
        """Per-packet category sums must equal per-packet totals, and data
        category totals must equal the sum over packets."""
        for pid, total in self.per_packet.items():
            cat_sum = sum(self.per_packet_category.get(pid, {}).values())
            assert abs(cat_sum - total) < 1e-6, (pid, cat_sum, total)
        data_total = sum(
            v for c, v in self.category_totals.items() if c not in ("control", "static")
        )
        packet_total = sum(self.per_packet.values())
        assert abs(data_total - packet_total) < 1e-3, (data_total, packet_total)
