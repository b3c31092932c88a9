# DRF serializers for the query protocol and the HTTP API
from rest_framework import serializers

PROTOCOL_OPS = ("query", "ping", "status")


class ProtocolRequestSerializer(serializers.Serializer):
    """One NDJSON request line"""
    op = serializers.CharField(max_length=32)
    file = serializers.CharField(required=False, allow_blank=False)
    line = serializers.IntegerField(required=False, min_value=1)

    def validate_op(self, value):
        if value not in PROTOCOL_OPS:
            raise serializers.ValidationError(f"Unknown op '{value}'; expected one of {', '.join(PROTOCOL_OPS)}")
        return value

    def validate(self, attrs):
        if attrs["op"] == "query":
            missing = [name for name in ("file", "line") if name not in attrs]
            if missing:
                raise serializers.ValidationError(f"query requires {' and '.join(missing)}")
        return attrs


class CloneQueryInputSerializer(serializers.Serializer):
    """Query string of GET /api/clones/"""
    file = serializers.CharField()
    line = serializers.IntegerField(min_value=1)


class BlockRefSerializer(serializers.Serializer):
    block_id = serializers.IntegerField()
    project = serializers.CharField()
    file = serializers.CharField()
    start_line = serializers.IntegerField()
    end_line = serializers.IntegerField()


class CloneResponseSerializer(serializers.Serializer):
    """Answer to a clone query"""
    ok = serializers.BooleanField(default=True)
    block = BlockRefSerializer()
    clones = BlockRefSerializer(many=True)
    marker = serializers.ChoiceField(choices=["green", "yellow", "red"])
    generation = serializers.IntegerField()


class ErrorSerializer(serializers.Serializer):
    code = serializers.CharField()
    message = serializers.CharField()


class IndexStatusSerializer(serializers.Serializer):
    """Serializer for index status endpoint"""
    loaded = serializers.BooleanField()
    generation = serializers.IntegerField()
    files = serializers.IntegerField()
    blocks = serializers.IntegerField()
    tokens = serializers.IntegerField()
    postings = serializers.IntegerField()
    pending_updates = serializers.IntegerField()
    theta = serializers.FloatField(allow_null=True)
    granularity = serializers.CharField(allow_null=True)


class HealthCheckSerializer(serializers.Serializer):
    """Serializer for health check endpoint"""
    status = serializers.CharField()
    service = serializers.CharField()
    version = serializers.CharField()
    languages = serializers.ListField(child=serializers.CharField())
