import os.path
import json
import logging
from abc import ABC, abstractmethod
from typing import Dict, Iterable, List, Tuple

logger = logging.getLogger(__name__)


class _BaseModel(ABC):
    """
    Abstract base class for every record persisted as structured text.
    A file is one JSON object per line: a versioned header line first, then
    one line per record, ordered by record id.
    """
    SCHEMA_VERSION = 1

    @classmethod
    def class_name_plural(cls):
        return f"{cls.__name__.lower()}s"

    @classmethod
    def header(cls, **extra) -> Dict[str, object]:
        """
        Build the header line of a file of this record type.
        :param extra: additional header fields (seed, config, counts...)
        :return: {'schema': <plural>, 'version': <int>, ...}
        """
        data = {"schema": cls.class_name_plural(),
                "version": cls.SCHEMA_VERSION}
        data.update(extra)
        return data

    @staticmethod
    def generate_record_id(index: int) -> str:
        """
        Create the record ID used for file names and manifest keys.
        :return: str: six digit zero-padded index, '000042'
        """
        return f"{index:06d}"

    @classmethod
    def from_json(cls, item_data: Dict[str, object]):
        """
        Create an instance of a class from one decoded JSON line.
        :param item_data: dictionary of a record line
        :return instance: an instance of the class
        """
        return cls._create_instance_from_json(item_data)

    @classmethod
    @abstractmethod
    def _create_instance_from_json(cls, item_data):
        """
        Abstract method that creates an instance of a class from a dictionary
        extracted from a record line.
        It must be implemented in every class that inherit this method.
        :param item_data: Dictionary of the JSON line.
        """
        raise NotImplementedError

    def to_json(self) -> Dict[str, object]:
        return self._prepare_data_to_save()

    @abstractmethod
    def _prepare_data_to_save(self) -> Dict[str, object]:
        """
        Abstract method that prepares the instance for a record line.
        It must be implemented in every class that inherit this method.
        :return: Dict[str, object]
        """
        raise NotImplementedError

    @classmethod
    def write_jsonl(cls, path: str, records: Iterable["_BaseModel"],
                    **header_extra) -> int:
        """
        Save records to a JSON-lines file, header first.
        :return: number of records written
        """
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        count = 0
        with open(path, 'w', encoding='utf-8') as file:
            file.write(json.dumps(cls.header(**header_extra),
                                  sort_keys=True) + "\n")
            for record in records:
                file.write(json.dumps(record.to_json(), sort_keys=True)
                           + "\n")
                count += 1
        logger.debug("wrote %d %s to %s", count, cls.class_name_plural(),
                     path)
        return count

    @classmethod
    def read_jsonl(cls, path: str) -> Tuple[Dict[str, object], List]:
        """
        Load a JSON-lines file written by write_jsonl.
        :return: (header, [instances])
        """
        with open(path, 'r', encoding='utf-8') as file:
            lines = [line for line in file.read().splitlines() if line]
        if not lines:
            raise ValueError(f"{path} is empty")
        header = json.loads(lines[0])
        if header.get("schema") != cls.class_name_plural():
            raise ValueError(f"{path}: expected schema "
                             f"'{cls.class_name_plural()}', found "
                             f"'{header.get('schema')}'")
        if header.get("version") != cls.SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported version "
                             f"{header.get('version')}")
        return header, [cls.from_json(json.loads(line))
                        for line in lines[1:]]
