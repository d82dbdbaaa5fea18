"""Flow feature catalogue and the 20 cross-domain feature combinations."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

# Feature ID -> column name. ID 78 is the label column, not a feature.
FEATURE_NAMES: dict[int, str] = {
    1: "Protocol",
    2: "Flow_Duration",
    3: "Total_Fwd_Packets",
    4: "Total_Backward_Packets",
    5: "Total_Length_of_Fwd_Packets",
    6: "Total_Length_of_Bwd_Packets",
    7: "Fwd_Packet_Length_Max",
    8: "Fwd_Packet_Length_Min",
    9: "Fwd_Packet_Length_Mean",
    10: "Fwd_Packet_Length_Std",
    11: "Bwd_Packet_Length_Max",
    12: "Bwd_Packet_Length_Min",
    13: "Bwd_Packet_Length_Mean",
    14: "Bwd_Packet_Length_Std",
    15: "Flow_Bytess",
    16: "Flow_Packetss",
    17: "Flow_IAT_Mean",
    18: "Flow_IAT_Std",
    19: "Flow_IAT_Max",
    20: "Flow_IAT_Min",
    21: "Fwd_IAT_Total",
    22: "Fwd_IAT_Mean",
    23: "Fwd_IAT_Std",
    24: "Fwd_IAT_Max",
    25: "Fwd_IAT_Min",
    26: "Bwd_IAT_Total",
    27: "Bwd_IAT_Mean",
    28: "Bwd_IAT_Std",
    29: "Bwd_IAT_Max",
    30: "Bwd_IAT_Min",
    31: "Fwd_PSH_Flags",
    32: "Bwd_PSH_Flags",
    33: "Fwd_URG_Flags",
    34: "Bwd_URG_Flags",
    35: "Fwd_Header_Length_2",
    36: "Bwd_Header_Length",
    37: "Fwd_Packetss",
    38: "Bwd_Packetss",
    39: "Min_Packet_Length",
    40: "Max_Packet_Length",
    41: "Packet_Length_Mean",
    42: "Packet_Length_Std",
    43: "Packet_Length_Variance",
    44: "FIN_Flag_Count",
    45: "SYN_Flag_Count",
    46: "RST_Flag_Count",
    47: "PSH_Flag_Count",
    48: "ACK_Flag_Count",
    49: "URG_Flag_Count",
    50: "CWE_Flag_Count",
    51: "ECE_Flag_Count",
    52: "DownUp_Ratio",
    53: "Average_Packet_Size",
    54: "Avg_Fwd_Segment_Size",
    55: "Avg_Bwd_Segment_Size",
    56: "Fwd_Avg_BytesBulk",
    57: "Fwd_Avg_PacketsBulk",
    58: "Fwd_Avg_Bulk_Rate",
    59: "Bwd_Avg_BytesBulk",
    60: "Bwd_Avg_PacketsBulk",
    61: "Bwd_Avg_Bulk_Rate",
    62: "Subflow_Fwd_Packets",
    63: "Subflow_Fwd_Bytes",
    64: "Subflow_Bwd_Packets",
    65: "Subflow_Bwd_Bytes",
    66: "Init_Win_bytes_forward",
    67: "Init_Win_bytes_backward",
    68: "act_data_pkt_fwd",
    69: "min_seg_size_forward",
    70: "Active_Mean",
    71: "Active_Std",
    72: "Active_Max",
    73: "Active_Min",
    74: "Idle_Mean",
    75: "Idle_Std",
    76: "Idle_Max",
    77: "Idle_Min",
}

LABEL_COLUMN = "multilabel"
LABEL_ID = 78

# Canonical dataset names with their full sizes and attack share.
DATASETS: dict[str, dict[str, float]] = {
    "CIC17": {"full_name": "CIC-IDS2017", "rows": 152_055, "attack_pct": 79.7},
    "CIC18": {"full_name": "CIC-IDS2018", "rows": 199_997, "attack_pct": 26.2},
    "SDN20": {"full_name": "SDN20", "rows": 205_167, "attack_pct": 66.6},
    "ANDMAL": {"full_name": "ANDMAL2017", "rows": 100_521, "attack_pct": 15.5},
}


@dataclass(frozen=True)
class CrossDomainSpec:
    """One row of the combination table.

    ``feature_id_lists[k]`` is the feature view for domain ``k``. When the
    combination names a single dataset, every domain reads from that dataset.
    ``printed`` keeps the table cell text verbatim and ``corrections`` lists
    every deviation from it that was needed to obtain valid ID lists.
    """

    sr_id: int
    dataset_names: tuple[str, ...]
    feature_id_lists: tuple[tuple[int, ...], ...]
    subsample_fraction: float = 1.0
    printed: tuple[str, ...] = ()
    corrections: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.dataset_names) not in (1, len(self.feature_id_lists)):
            raise ValueError("dataset_names must name one dataset or one per feature list")
        for ids in self.feature_id_lists:
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate feature IDs in {ids}")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must lie in (0, 1]")

    @property
    def n_domains(self) -> int:
        return len(self.feature_id_lists)

    def domain_dataset(self, k: int) -> str:
        """Dataset that feeds domain ``k``."""
        if len(self.dataset_names) == 1:
            return self.dataset_names[0]
        return self.dataset_names[k]

    @property
    def required_datasets(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.dataset_names))


# (datasets, combination label, printed cells). Cells are copied character for
# character from the table, including its typos.
_TABLE: dict[int, tuple[tuple[str, ...], str, tuple[str, ...]]] = {
    1: (("CIC18",), "10-5", ("1,10,11,24,34,35,40,50,73,77", "9,37,52,62,65")),
    2: (("CIC18",), "5-5", ("13,20,26,33,72", "3,7,25,37,64")),
    3: (("CIC18",), "15-15", (
        "4,5,7,10,15,19,20,21,22,24,26,41,42,47,57",
        "13,14,17,23,27,35,37,48,50,56,59,68,71,73,77",
    )),
    4: (("CIC18",), "5-20", (
        "14,24,45,68,73",
        "1,10,13,15,16,21,22,23,29,31,38,41,42,56,58,60,64,65,70,72",
    )),
    5: (("CIC18",), "30-5", (
        "1,2,3,5,8,13,17,19,20,21,25,31,39,40,42,46,47,53,56,57,58,61,62,65,66,67,70,74,76,77",
        "24,29,30,41,44,78",
    )),
    6: (("CIC17",), "5-5", ("12,14,18,53.70", "10,22,30,54,73")),
    7: (("CIC17",), "15-15", (
        "9,11,15,22,32,35,41,45,47,53,54,56,58,65,67",
        "13,14,16,28,34,40,44,51,59,60,64,68,71,72,74",
    )),
    8: (("CIC17",), "5-20", (
        "29,62,71,75,77",
        "6,15,24,25,27,35,41,44,47,49,50,52,53,61,64,66,67,69,74,76",
    )),
    9: (("CIC17",), "30-5", (
        "1,2,3,4,5,6,7,15,16,18,20,22,23,24,25,29,32,36,37,39,43,45,49,51,57,62,65,69,74,75",
        "8,31,33,61,67",
    )),
    10: (("SDN20",), "5-5", ("6,27,30,36,69", "13,15,20,62,66")),
    11: (("SDN20",), "15-15", (
        "5,6,16,19,20,21,23,24,26,33,52,53,65,75,77",
        "2,3,9,13,14,29,34,41,51,60,67,71,73,74,76",
    )),
    12: (("SDN20",), "5-20", (
        "2,31,35,70,73",
        "1,11,12,14,15,16,17,18,20,24,28,33,44,50,54,56,66,69,71,77",
    )),
    13: (("SDN20",), "30-5", (
        "2,4,6,8,14,18,19,23,25,26,30,36,37,38,40,44,45,52,55,56,57,59,61,63,65,70,73,74,75,77",
        "11,15,29,33,47",
    )),
    14: (("CIC17", "CIC18"), "10-10", (
        "5,12,15,25,33,51,64,66,67,77",
        "11,17,26,29,31,32,37,45,56,73",
    )),
    15: (("CIC17", "SDN20"), "10-10", (
        "5,12,15,25,33,51,64,66,67,77",
        "1,6,7,9,28,54,55,63,65,74",
    )),
    16: (("CIC17", "ANDMAL"), "10-10", (
        "5,12,15,25,33,51,64,66,67,77",
        "4,22,35,42,43,46,48,50,69,71",
    )),
    17: (("CIC18", "SDN20"), "10-10", (
        "11,17,26,29,31,32,37,45,56,73",
        "1,6,7,9,28,54,55,63,65,74",
    )),
    18: (("CIC18", "ANDMAL"), "10-10", (
        "11,17,26,29,31,32,37,45,56,73",
        "4,22,35,42,43,46,48,50,69,71",
    )),
    19: (("SDN20", "ANDMAL"), "10-10", (
        "1,6,7,9,28,54,55,63,65,74",
        "4,22,35,42,43,46,48,50,69,71",
    )),
    20: (("CIC17", "CIC18", "SDN20"), "10-10-10", (
        "1,3,7,10,18,26,38,48,54,55,56,68,69,71,75",
        "6,7,9,10,15,16,19,21,22,27,37,40,46,48,58,70,74",
        "8,10,15,17,21,34,38,51,55,56,59,63,67,69,73",
    )),
}

COMBINATION_LABELS: dict[int, str] = {sr: row[1] for sr, row in _TABLE.items()}


def _parse_cell(cell: str, sr_id: int, corrections: list[str]) -> tuple[int, ...]:
    if "." in cell:
        corrections.append(f"Sr#{sr_id}: read '{cell}' with '.' as ','")
        cell = cell.replace(".", ",")
    ids = [int(tok) for tok in cell.split(",")]
    if LABEL_ID in ids:
        corrections.append(f"Sr#{sr_id}: dropped label column ID {LABEL_ID} from '{cell}'")
        warnings.warn(
            f"Sr#{sr_id} lists the label column (ID {LABEL_ID}) as a feature; dropping it",
            stacklevel=3,
        )
        ids = [i for i in ids if i != LABEL_ID]
    return tuple(ids)


def combination_registry(sr_id: int, subsample_fraction: float = 1.0) -> CrossDomainSpec:
    """Return the dataset names and feature-ID lists of combination ``sr_id``."""
    if sr_id not in _TABLE:
        raise KeyError(f"unknown combination Sr#{sr_id}; valid ids are 1..20")
    datasets, _, cells = _TABLE[sr_id]
    corrections: list[str] = []
    lists = tuple(_parse_cell(c, sr_id, corrections) for c in cells)
    return CrossDomainSpec(
        sr_id=sr_id,
        dataset_names=datasets,
        feature_id_lists=lists,
        subsample_fraction=subsample_fraction,
        printed=cells,
        corrections=tuple(corrections),
    )
