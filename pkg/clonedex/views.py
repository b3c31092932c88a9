# Django REST API views over the clone query service
import logging

from rest_framework import status
from rest_framework.permissions import AllowAny
from rest_framework.response import Response
from rest_framework.views import APIView

from . import __version__
from .exceptions import BadRequest, CloneDexError, IndexNotLoaded, NoBlockAtLocation
from .languages import language_registry
from .serializers import (
    CloneQueryInputSerializer,
    CloneResponseSerializer,
    HealthCheckSerializer,
    IndexStatusSerializer,
)
from .service import CloneQuery, error_response, get_service

logger = logging.getLogger(__name__)

ERROR_STATUS = {
    NoBlockAtLocation: status.HTTP_404_NOT_FOUND,
    IndexNotLoaded: status.HTTP_503_SERVICE_UNAVAILABLE,
}


def describe_errors(errors) -> str:
    """One line out of DRF field errors"""
    return "; ".join(f"{field}: {' '.join(str(m) for m in messages)}" for field, messages in errors.items())


class HealthCheckView(APIView):
    """Health check endpoint"""
    permission_classes = [AllowAny]

    def get(self, request):
        serializer = HealthCheckSerializer({
            "status": "healthy",
            "service": "clonedex",
            "version": __version__,
            "languages": language_registry.names(),
        })
        return Response(serializer.data)


class IndexStatusView(APIView):
    """Generation and size of the loaded index"""
    permission_classes = [AllowAny]

    def get(self, request):
        serializer = IndexStatusSerializer(get_service().status())
        return Response(serializer.data)


class CloneQueryView(APIView):
    """Clones of the block containing ?file=<path>&line=<n>"""
    permission_classes = [AllowAny]

    def get(self, request):
        serializer = CloneQueryInputSerializer(data=request.query_params)
        if not serializer.is_valid():
            return Response(error_response(BadRequest(describe_errors(serializer.errors))),
                            status=status.HTTP_400_BAD_REQUEST)

        query = CloneQuery(serializer.validated_data["file"], serializer.validated_data["line"])
        try:
            response = get_service().handle_query(query)
        except CloneDexError as e:
            logger.info(f"Clone query {query.file}:{query.line} failed: {e}")
            return Response(error_response(e),
                            status=ERROR_STATUS.get(type(e), status.HTTP_400_BAD_REQUEST))
        return Response(CloneResponseSerializer(response.to_dict()).data)
